import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entcascade.classes import CLASS_INDEX
from entcascade.clustering import LabeledEntitySet, cluster_addresses, label_entities
from entcascade.errors import MalformedRecord
from entcascade.features import (
    ADDRESS_SCHEMA,
    ENTITY_SCHEMA,
    MOTIF1_SCHEMA,
    MOTIF2_SCHEMA,
    FeatureFrame,
    address_features,
    entity_features,
    motif1_features,
    motif2_features,
)
from entcascade.graph import build_address_graph, build_entity_graph
from entcascade.ingest import LabelBook, compute_fee
from entcascade.motifs import extract_1motifs, extract_2motifs, pair_index_from_graph
from entcascade.pipeline import featurize
from entcascade.synth import SynthConfig, generate

from .conftest import random_ledger, tx


def label_all(c, cls="Service") -> LabeledEntitySet:
    return LabeledEntitySet({e: (f"E{e}", cls) for e in range(c.n_entities)}, frozenset())


def setup(txs, cls="Service"):
    c = cluster_addresses(txs)
    g = build_entity_graph(txs, c)
    return c, g, label_all(c, cls)


def test_schema_sizes():
    assert [len(s) for s in (ENTITY_SCHEMA, ADDRESS_SCHEMA, MOTIF1_SCHEMA, MOTIF2_SCHEMA)] == [7, 7, 8, 15]


class TestEntityFeatures:
    def test_single_incoming_edge(self):
        txs = [tx("cb", 0, [], [("a", 100_000_000)])]
        c, g, labels = setup(txs)
        frame = entity_features(g, labels)
        assert frame.values.tolist() == [[1.0, 0.0, 1.0, 1.0, 0.0, 1.0, 0.0]]

    def test_self_transfer_only_entity(self):
        # a and b are one entity (co-spent in s1) that only ever pays itself
        txs = [
            tx("s1", 0, [("a", 500), ("b", 20)], [("b", 480)]),
            tx("s2", 1, [("b", 480)], [("a", 450)]),
        ]
        c, g, labels = setup(txs)
        assert c.n_entities == 1
        received, sent, balance = entity_features(g, labels).values[0, :3]
        fees = sum(compute_fee(t).value for t in txs)
        assert sent - received == pytest.approx(fees / 1e8, rel=1e-12)
        assert balance == -fees / 1e8

    def test_rows_match_labeled_entities(self):
        txs = random_ledger(np.random.default_rng(1), 60)
        c = cluster_addresses(txs)
        book = LabelBook({a: (f"E{c.entity_of[a]}", "Mixer") for a in list(c.entity_of)[::5]})
        labels = label_entities(c, book)
        frame = entity_features(build_entity_graph(txs, c), labels)
        assert frame.n_rows == len(labels.labels)
        assert frame.entity.tolist() == labels.sorted_ids()
        assert set(frame.label.tolist()) == {CLASS_INDEX["Mixer"]}

    def test_balance_is_exact_difference(self):
        txs = random_ledger(np.random.default_rng(2), 80)
        c, g, labels = setup(txs)
        frame = entity_features(g, labels)
        recv = {e: 0 for e in range(c.n_entities)}
        sent = dict(recv)
        for t in txs:
            for a, v in t.outputs:
                recv[c.entity_of[a]] += v
            for a, v in t.inputs:
                sent[c.entity_of[a]] += v
        for e, row in zip(frame.entity, frame.values):
            assert row[2] == (recv[e] - sent[e]) / 1e8


class TestAddressFeatures:
    def test_one_shot_address_is_unique(self):
        txs = [tx("t", 0, [("a", 10)], [("fresh", 9)])]
        c, _, labels = setup(txs)
        frame = address_features(build_address_graph(txs), c, labels)
        row = frame.values[list(frame.entity).index(c.entity_of["fresh"])]
        assert row[5] == 1.0

    def test_siblings(self):
        txs = [tx("t", 0, [("a", 5), ("b", 5)], [("c", 9)])]
        c, _, labels = setup(txs)
        frame = address_features(build_address_graph(txs), c, labels)
        rows = frame.values[frame.entity == c.entity_of["a"]]
        assert rows[:, 6].tolist() == [1.0, 1.0]

    def test_address_sums_match_entity_totals(self):
        res = generate(SynthConfig(n_entities_per_class={"Exchange": 2, "Service": 2}, tx_budget=800, seed=2))
        c = cluster_addresses(res.ledger)
        labels = label_entities(c, res.labels)
        ent = entity_features(build_entity_graph(res.ledger, c), labels)
        addr = address_features(build_address_graph(res.ledger), c, labels)
        for e, row in zip(ent.entity, ent.values):
            mine = addr.values[addr.entity == e]
            assert mine[:, 2].sum() == pytest.approx(row[0], rel=1e-12)
            assert mine[:, 3].sum() == pytest.approx(row[1], rel=1e-12)


class TestMotifFeatures:
    def test_unique_branch_without_reverse_traffic(self):
        txs = [tx("t", 0, [("a", 10)], [("b", 9)])]
        c, g, labels = setup(txs)
        frame = motif1_features(extract_1motifs(g), pair_index_from_graph(g), labels)
        assert frame.values[0].tolist() == [1e-7, 9e-8, 1, 1, 1, 0, 1e-8, 0]

    def test_loop_branch_flag(self):
        txs = [tx("t", 0, [("a", 10)], [("a", 9)])]
        c, g, labels = setup(txs)
        frame = motif1_features(extract_1motifs(g), pair_index_from_graph(g), labels)
        assert frame.values[0, 7] == 1.0

    def _motif2(self, addrs):
        a, b, c_ = addrs
        txs = [tx("t1", 1, [(a, 10)], [(b, 9)]), tx("t2", 2, [(b, 9)], [(c_, 7)])]
        c, g, labels = setup(txs)
        frame = motif2_features(extract_2motifs(g), pair_index_from_graph(g), labels)
        return txs, frame

    def test_round_trip_chain_flags(self):
        _, frame = self._motif2(("a", "b", "a"))
        assert frame.values[0, 12:].tolist() == [0, 0, 1]

    def test_all_loop_chain_flags(self):
        _, frame = self._motif2(("a", "a", "a"))
        assert frame.values[0, 12:].tolist() == [1, 1, 1]

    def test_fees_match_raw_ledger(self):
        txs = random_ledger(np.random.default_rng(9), 120)
        c, g, labels = setup(txs)
        fee_of = {t.tx_id: compute_fee(t).value / 1e8 for t in txs}
        recs = extract_2motifs(g)
        frame = motif2_features(recs, pair_index_from_graph(g), labels)
        assert frame.n_rows == len(recs) > 0
        for r, row in zip(recs, frame.values):
            assert (row[8], row[9]) == (fee_of[r.first.tx], fee_of[r.second.tx])

    def test_row_count_bijection_and_owner(self):
        txs = random_ledger(np.random.default_rng(10), 60)
        c, g, labels = setup(txs)
        recs = extract_1motifs(g)
        frame = motif1_features(recs, pair_index_from_graph(g), labels)
        assert frame.n_rows == len(recs)
        assert frame.entity.tolist() == [r.branch.e_in for r in recs]

    def test_unlabeled_owners_dropped(self):
        txs = random_ledger(np.random.default_rng(11), 60)
        c = cluster_addresses(txs)
        g = build_entity_graph(txs, c)
        labels = LabeledEntitySet({0: ("E0", "Mixer")}, frozenset(range(1, c.n_entities)))
        frame = motif1_features(extract_1motifs(g), pair_index_from_graph(g), labels)
        assert set(frame.entity.tolist()) <= {0}


class TestFrame:
    def test_csv_round_trip_is_lossless(self):
        res = generate(SynthConfig(n_entities_per_class={"Mixer": 2, "Gambling": 2}, tx_budget=600, seed=5))
        frames = featurize(res.ledger, res.labels)
        for name, frame in frames.as_dict().items():
            back = FeatureFrame.from_csv(frame.to_csv(), name)
            assert back.features == frame.features and back.kinds == frame.kinds
            assert np.array_equal(back.entity, frame.entity)
            assert np.array_equal(back.label, frame.label)
            assert np.array_equal(back.values, frame.values)
            assert np.all(np.isfinite(frame.values))

    def test_boolean_columns_are_binary(self):
        res = generate(SynthConfig(n_entities_per_class={"Mixer": 2, "Exchange": 2}, tx_budget=600, seed=6))
        for frame in featurize(res.ledger, res.labels).as_dict().values():
            for j, kind in enumerate(frame.kinds):
                if kind == "boolean":
                    assert set(np.unique(frame.values[:, j])) <= {0.0, 1.0}

    def test_empty_labels_give_empty_frames(self):
        res = generate(SynthConfig(n_entities_per_class={"Mixer": 1}, tx_budget=50, seed=1))
        frames = featurize(res.ledger, LabelBook({}))
        for frame in frames.as_dict().values():
            assert frame.n_rows == 0
            assert FeatureFrame.from_csv(frame.to_csv(), frame.name).n_rows == 0

    @pytest.mark.parametrize("text", ["", "a,b\n", "entity_id,label,x\n1,Mixer\n", "entity_id,label,x\n1,Foo,2\n"])
    def test_malformed_csv(self, text):
        with pytest.raises(MalformedRecord):
            FeatureFrame.from_csv(text)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30))
def test_float_csv_round_trip(values):
    n = len(values)
    frame = FeatureFrame(
        "x", ("v",), ("numeric",), np.arange(n), np.zeros(n, dtype=np.int64), np.asarray(values).reshape(n, 1)
    )
    back = FeatureFrame.from_csv(frame.to_csv(), "x")
    assert back.values.tobytes() == frame.values.tobytes()
