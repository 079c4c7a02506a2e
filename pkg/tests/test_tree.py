import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entcascade.errors import EmptyFrame
from entcascade.features import FeatureFrame
from entcascade.ml import _kernels
from entcascade.ml.tree import DecisionTree, TreeConfig, fit_tree, grow_classification_tree, grow_regression_tree

from .oracles import exhaustive_root_split, split_impurity

# 2 features x 8 rows; feature 1 separates the classes, feature 0 does not
FIXTURE_X = np.array(
    [[1, 7], [2, 3], [3, 8], [4, 1], [5, 9], [6, 2], [7, 6], [8, 4]], dtype=float
)
FIXTURE_Y = np.array([0, 1, 0, 1, 0, 1, 0, 0])


def frame(X, y) -> FeatureFrame:
    X = np.asarray(X, dtype=float)
    return FeatureFrame(
        "t", tuple(f"f{j}" for j in range(X.shape[1])), ("numeric",) * X.shape[1],
        np.arange(len(y)), np.asarray(y, dtype=np.int64), X,
    )


def test_single_class_is_one_leaf():
    tree = fit_tree(frame([[1.0], [2.0], [3.0]], [4, 4, 4]))
    assert tree.n_nodes == 1
    assert tree.value[0].tolist() == [0, 0, 0, 0, 1, 0]


def test_forced_split_at_midpoint():
    tree = fit_tree(frame([[0.0], [1.0]], [0, 1]))
    assert (tree.feature[0], tree.threshold[0]) == (0, 0.5)
    assert tree.predict(np.array([[0.2], [0.8]])).tolist() == [0, 1]


def test_root_matches_exhaustive_oracle_on_fixture():
    f, thr, score = exhaustive_root_split(FIXTURE_X, FIXTURE_Y, 6)
    tree = fit_tree(frame(FIXTURE_X, FIXTURE_Y))
    # class 1 rows are exactly those with feature 1 in {1, 2, 3}
    assert (tree.feature[0], tree.threshold[0]) == (f, thr) == (1, 3.5)
    assert score == 0.0


def test_root_score_matches_oracle_on_random_fixtures():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n, d = int(rng.integers(4, 40)), int(rng.integers(1, 5))
        X = rng.integers(0, 6, size=(n, d)).astype(float)
        y = rng.integers(0, 3, size=n)
        _, _, best = exhaustive_root_split(X, y, 6)
        tree = fit_tree(frame(X, y))
        if tree.n_nodes == 1:
            assert best == np.inf or best >= split_impurity(X, y, 0, np.inf, 6) - 1e-12
            continue
        got = split_impurity(X, y, int(tree.feature[0]), float(tree.threshold[0]), 6)
        assert got == pytest.approx(best, abs=1e-12)


def test_weighted_rows_count_proportionally():
    X = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0, 0, 1, 1])
    w = np.array([2.0, 0.0, 1.0, 1.0])
    tree = grow_classification_tree(X, y, w)
    # zero-weight row is excluded, so the split lies between 0 and 2
    assert tree.threshold[0] == 1.0
    assert tree.value[tree.apply(np.array([[0.0]]))[0]].tolist()[:2] == [1.0, 0.0]


def test_invalid_weights_and_empty():
    with pytest.raises(ValueError):
        grow_classification_tree(np.ones((2, 1)), np.array([0, 1]), np.zeros(2))
    with pytest.raises(EmptyFrame):
        fit_tree(frame(np.zeros((0, 1)), []))


def test_depth_limit():
    rng = np.random.default_rng(1)
    X, y = rng.normal(size=(200, 3)), rng.integers(0, 6, 200)
    tree = fit_tree(frame(X, y), config=TreeConfig(max_depth=2))
    assert tree.depth() <= 2
    assert fit_tree(frame(X, y)).depth() > 2


def test_structure_invariants():
    rng = np.random.default_rng(2)
    X, y = rng.normal(size=(150, 4)), rng.integers(0, 6, 150)
    tree = fit_tree(frame(X, y), config=TreeConfig(max_features=2), seed=9)
    leaves = tree.feature < 0
    assert np.allclose(tree.value[leaves].sum(axis=1), 1.0)
    # fully grown on distinct points: training rows are classified perfectly
    assert np.array_equal(tree.predict(X), y)
    reach = tree.apply(X)
    # every leaf is reached by at least one training row, so both children were non-empty
    assert set(np.flatnonzero(leaves)) == set(reach.tolist())


def test_importance_and_serialization():
    tree = fit_tree(frame(FIXTURE_X, FIXTURE_Y))
    imp = tree.importance(2)
    assert imp[1] > 0 and np.all(imp >= 0)
    back = DecisionTree.from_dict(tree.to_dict())
    assert np.array_equal(back.predict(FIXTURE_X), tree.predict(FIXTURE_X))
    assert back.n_leaves == tree.n_leaves


def test_regression_tree_reduces_squared_error():
    X = np.linspace(0, 1, 40).reshape(-1, 1)
    target = np.where(X[:, 0] > 0.5, 1.0, -1.0)
    tree = grow_regression_tree(X, target, max_depth=1)
    assert tree.feature[0] == 0
    left = X[:, 0] <= tree.threshold[0]
    assert np.all(target[left] == -1.0) and np.all(target[~left] == 1.0)


def test_splitmix_matches_reference():
    s = 12345
    state = np.uint64(s)
    for _ in range(5):
        s, out = _kernels.splitmix64_py(s)
        state, got = _kernels.splitmix64(np.uint64(state))
        assert int(got) == out and int(state) == s


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["exp", "cube", "affine"]))
def test_monotone_transform_invariance(seed, kind):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 3))
    y = rng.integers(0, 4, 60)
    transform = {"exp": np.exp, "cube": lambda v: v**3 + v, "affine": lambda v: 3.0 * v - 7.0}[kind]
    Xt = transform(X)
    cfg = TreeConfig(max_depth=3, max_features=2)
    a = fit_tree(frame(X, y), config=cfg, seed=seed)
    b = fit_tree(frame(Xt, y), config=cfg, seed=seed)
    assert np.array_equal(a.feature, b.feature)
    assert np.array_equal(a.value, b.value)
    # midpoints move under a non-affine transform, so probe with the training
    # rows, whose side of every split they reach is fixed by order alone
    probe = X[rng.permutation(60)]
    assert np.array_equal(a.predict(probe), b.predict(transform(probe)))
