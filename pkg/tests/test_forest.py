import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import logistic_problem
from tennis_sel.errors import ConfigError
from tennis_sel.features import Design, FeatureName as F
from tennis_sel.forest import (
    NTREE,
    ForestModel,
    Leaf,
    Split,
    fit_forest,
    fit_tree,
    predict_prob,
    stratified_folds,
    tune_mtry,
)

FEATS = (F.Points, F.Rank, F.Elo, F.Age30)


def design(X, y, feats=None):
    X = np.asarray(X, float).reshape(len(y), -1)
    feats = feats or FEATS[: X.shape[1]]
    return Design(tuple(feats), X, np.asarray(y, np.int64), np.zeros(len(y), np.int64))


def splits(node):
    if isinstance(node, Leaf):
        return []
    return [node] + splits(node.left) + splits(node.right)


def leaves(node):
    if isinstance(node, Leaf):
        return [node]
    return leaves(node.left) + leaves(node.right)


def test_pure_sample_is_single_leaf():
    t = fit_tree(design(np.arange(20.0), np.ones(20)), 1)
    assert t.root == Leaf(0, 20)


def test_perfect_separator():
    X = np.tile([0.0, 1.0], 10)
    y = np.tile([0, 1], 10)
    root = fit_tree(design(X, y), 1).root
    assert isinstance(root, Split)
    assert 0 < root.threshold < 1
    assert root.left == Leaf(10, 0) and root.right == Leaf(0, 10)


def test_tree_determinism(rng):
    X, y = logistic_problem(rng, 300, [1.0, 0.5, 0.0])
    a = fit_tree(design(X, y), 2, rng=5)
    b = fit_tree(design(X, y), 2, rng=5)
    assert a.to_dict() == b.to_dict()


def test_split_invariants(rng):
    X, y = logistic_problem(rng, 400, [1.0, -1.0, 0.3])
    t = fit_tree(design(X, y), 2, rng=1)
    for s in splits(t.root):
        assert s.gain > 0
    for leaf in leaves(t.root):
        assert leaf.n0 >= 0 and leaf.n1 >= 0 and leaf.n0 + leaf.n1 > 0


def _thresholds_between_observed(tree, X, node_rows, i=0):
    if tree.feature[i] < 0:
        return
    vals = np.unique(X[node_rows, tree.feature[i]])
    thr = tree.threshold[i]
    assert np.any(vals < thr) and np.any(vals > thr)
    below = vals[vals <= thr].max()
    above = vals[vals > thr].min()
    assert below < thr < above
    go_left = X[node_rows, tree.feature[i]] <= thr
    _thresholds_between_observed(tree, X, node_rows[go_left], tree.left[i])
    _thresholds_between_observed(tree, X, node_rows[~go_left], tree.right[i])


def test_thresholds_strictly_between_observed_values(rng):
    X, y = logistic_problem(rng, 300, [1.0, 0.5])
    X = np.round(X, 1)
    t = fit_tree(design(X, y), 2, rng=3)
    _thresholds_between_observed(t, X, np.arange(300))


def test_training_accuracy_beats_majority(rng):
    X, y = logistic_problem(rng, 300, [0.5, 0.2])
    for seed in range(5):
        idx = np.random.default_rng(seed).integers(0, 300, 300)
        t = fit_tree(design(X[idx], y[idx]), 1, rng=seed)
        acc = np.mean((t.predict_proba(X[idx]) > 0.5) == (y[idx] == 1))
        assert acc >= max(y[idx].mean(), 1 - y[idx].mean())


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_duplicating_data_keeps_splits(seed, copies):
    rng = np.random.default_rng(seed)
    X, y = logistic_problem(rng, 80, [1.0, 0.5])
    a = fit_tree(design(X, y), 1, rng=seed, min_node=5)
    b = fit_tree(design(np.tile(X, (copies, 1)), np.tile(y, copies)), 1, rng=seed,
                 min_node=5 * copies)
    np.testing.assert_array_equal(a.feature, b.feature)
    np.testing.assert_array_equal(a.threshold, b.threshold)


def test_forest_determinism_and_parallel(rng):
    X, y = logistic_problem(rng, 500, [1.0, -0.5, 0.2])
    d = design(X, y)
    a = fit_forest(d, 2, 60, seed=9)
    b = fit_forest(d, 2, 60, seed=9)
    c = fit_forest(d, 2, 60, seed=9, n_jobs=4)
    pa, pb, pc = (m.predict_proba(X) for m in (a, b, c))
    assert np.array_equal(pa, pb) and np.array_equal(pa, pc)
    assert not np.array_equal(pa, fit_forest(d, 2, 60, seed=10).predict_proba(X))


def test_row_order_fixed_gives_identical_predictions(rng):
    X, y = logistic_problem(rng, 200, [1.0])
    perm = np.random.default_rng(0).permutation(200)
    a = fit_forest(design(X[perm], y[perm]), 1, 30, seed=2)
    b = fit_forest(design(X[perm], y[perm]), 1, 30, seed=2)
    assert np.array_equal(a.predict_proba(X), b.predict_proba(X))


def test_forest_defaults_and_probabilities(rng):
    X, y = logistic_problem(rng, 200, [1.0, 1.0])
    m = fit_forest(design(X, y), 1)
    assert m.ntree == NTREE == 400
    p = m.predict_proba(X)
    assert np.all((p >= 0) & (p <= 1))
    np.testing.assert_allclose(p, m.leaf_proportions(X).mean(axis=1), atol=1e-12)


def test_single_class_forest_predicts_that_class():
    m = fit_forest(design(np.arange(30.0), np.ones(30)), 1, 10)
    assert np.all(m.predict_proba(np.array([[-5.0], [50.0]])) == 1.0)


def test_mean_of_leaf_proportions():
    base = fit_forest(design(np.tile([0.0, 1.0], 10), np.tile([0, 1], 10)), 1, 2, seed=0)
    d = base.to_dict()
    d["trees"] = [
        {"feature": [-1], "threshold": [0.0], "left": [-1], "right": [-1], "n0": [8], "n1": [2]},
        {"feature": [-1], "threshold": [0.0], "left": [-1], "right": [-1], "n0": [2], "n1": [8]},
    ]
    m = ForestModel.from_dict(d)
    assert predict_prob(m, {F.Points: 3.0}) == pytest.approx(0.5)


def test_hard_label_matches_majority_vote_with_pure_leaves(rng):
    X, y = logistic_problem(rng, 200, [1.0, 0.5])
    m = fit_forest(design(X, y), 2, 25, seed=4, min_node=1)
    votes = (m.leaf_proportions(X) > 0.5).mean(axis=1)
    assert np.array_equal(m.predict_proba(X) > 0.5, votes > 0.5)


def test_json_round_trip(rng):
    X, y = logistic_problem(rng, 200, [1.0, 0.5])
    m = fit_forest(design(X, y), 2, 20, seed=1)
    back = ForestModel.from_dict(json.loads(json.dumps(m.to_dict())))
    assert np.array_equal(back.predict_proba(X), m.predict_proba(X))


def test_mtry_bounds(rng):
    X, y = logistic_problem(rng, 50, [1.0])
    with pytest.raises(ConfigError):
        fit_forest(design(X, y), 2, 5)


def test_stratified_folds_balance():
    y = np.array([0] * 37 + [1] * 63)
    folds = stratified_folds(y, 10, seed=0)
    for k in range(10):
        assert abs((y[folds == k] == 1).sum() - 6.3) <= 1


def test_tune_mtry_examples(rng):
    X, y = logistic_problem(rng, 100, [1.0, 1.0])
    assert tune_mtry(design(X, y), [2], 10) == 2
    assert tune_mtry(design(X[:, :1], y), None, 10, ntree=10) == 1
    with pytest.raises(ConfigError):
        tune_mtry(design(X[:5], y[:5]), [1, 2], 10)
    with pytest.raises(ConfigError):
        tune_mtry(design(X, y), [3], 10)


def test_tune_mtry_exact_tie_picks_smallest():
    # a pure outcome makes every candidate score exactly 1.0
    X = np.random.default_rng(0).standard_normal((60, 3))
    assert tune_mtry(design(X, np.ones(60)), [3, 2, 1], 5, ntree=5) == 1
