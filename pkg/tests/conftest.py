from __future__ import annotations

import time

import numpy as np
import pytest

from entcascade.ingest import RawTransaction


def tx(tx_id: str, t: int, inputs=(), outputs=()) -> RawTransaction:
    return RawTransaction(tx_id, t, tuple(inputs), tuple(outputs))


def _split(rng: np.random.Generator, total: int, parts: int) -> list[int]:
    cuts = np.sort(rng.integers(0, total + 1, size=parts - 1))
    return np.diff(np.concatenate([[0], cuts, [total]])).astype(int).tolist()


def random_ledger(
    rng: np.random.Generator,
    n_tx: int,
    n_addr: int | None = None,
    t_span: int | None = None,
    coinbase_share: float = 0.1,
) -> list[RawTransaction]:
    """Valid random ledger over a small address pool, so reuse and chaining are common.

    Timestamps come from a narrow range to exercise equal-timestamp ties.
    """
    n_addr = n_addr or max(4, n_tx)
    t_span = t_span or max(1, n_tx // 2)
    addrs = [f"a{i:05d}" for i in range(n_addr)]
    txs = []
    for i in range(n_tx):
        t = int(rng.integers(0, t_span))
        if rng.random() < coinbase_share:
            inputs = []
            total = 5_000
        else:
            k = 1 if rng.random() < 0.6 else int(rng.integers(2, 4))
            picked = rng.choice(n_addr, size=min(k, n_addr), replace=False)
            inputs = [(addrs[j], int(rng.integers(1, 1_000))) for j in picked]
            spent = sum(v for _, v in inputs)
            total = spent - int(rng.integers(0, spent // 10 + 1))
        m = int(rng.integers(1, 4))
        payees = rng.choice(n_addr, size=m, replace=True)
        outputs = [(addrs[j], v) for j, v in zip(payees, _split(rng, total, m))]
        txs.append(tx(f"tx{i:05d}", t, inputs, outputs))
    return txs


class Timer:
    def __enter__(self) -> "Timer":
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc) -> None:
        self.elapsed = time.perf_counter() - self.start


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def default_synth():
    """The default 60-entity, 50,000-transaction ledger, generated once per session."""
    from entcascade.synth import SynthConfig, generate

    return generate(SynthConfig())


ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def criterion(request, capsys):
    """Record one acceptance verdict, echo it live, and fail the test when it is red."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, [])

    def record(number: int, name: str, ok: bool, detail: str) -> None:
        line = f"ACCEPTANCE {number:>2} {'PASS' if ok else 'FAIL'}  {name}: {detail}"
        results.append((number, line))
        with capsys.disabled():
            print("\n" + line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE_KEY, [])
    if results:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(results):
            terminalreporter.write_line(line)
