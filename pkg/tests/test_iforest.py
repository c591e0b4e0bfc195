import json
import logging
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.ensemble import IsolationForest

from nasdisrupt.errors import DataError
from nasdisrupt.iforest import (
    IsolationForestModel, IsolationTree, anomaly_score, anomaly_scores, build_tree, c_factor, fit_iforest,
    path_length, scale_scores, score_from_mean_path,
)

from oracles import c_formula, planted_outliers, rank_auc


def test_c_values():
    assert c_factor(1) == 0.0
    assert c_factor(2) == 1.0
    assert abs(c_factor(256) - (2 * (math.log(255) + 0.5772156649) - 2 * 255 / 256)) < 1e-9
    assert c_factor(256) == pytest.approx(10.244, abs=1e-3)  # quoted value is truncated


@given(st.integers(1, 100_000))
def test_c_matches_formula(m):
    assert abs(c_factor(m) - c_formula(m)) < 1e-9


def test_score_formula_points():
    c = c_factor(256)
    assert score_from_mean_path(c, c) == 0.5
    assert score_from_mean_path(2 * c, c) == 0.25
    assert score_from_mean_path(1e-12, c) == pytest.approx(1.0)


def test_identical_points_score_half():
    x = np.full((300, 4), 3.25)
    model = fit_iforest(x, n_trees=20, psi=256, seed=0)
    assert (anomaly_scores(model, x) == 0.5).all()


def test_singleton_leaf_depth():
    # hand-built tree: root splits feature 0 at 0.5, right child splits again at 0.75
    tree = IsolationTree.from_nested([0, 0.5, [1], [0, 0.75, [1], [0, 0.9, [1], [1]]]], height_limit=3)
    assert path_length(tree, [0.95]) == 3.0
    assert path_length(tree, [0.1]) == 1.0


def test_leaf_adjustment():
    tree = IsolationTree.from_nested([0, 0.5, [4], [1]], height_limit=1)
    assert path_length(tree, [0.0]) == pytest.approx(1 + c_factor(4))


def walk(tree, node, lo, hi, sample):
    """Recursive check: split values strictly inside the node's sample range."""
    if tree.feature[node] < 0:
        assert tree.size[node] >= 1
        return
    f, t = tree.feature[node], tree.threshold[node]
    vals = sample[:, f]
    assert vals.min() < t < vals.max()
    left = sample[vals < t]
    right = sample[vals >= t]
    assert tree.size[tree.left[node]] == len(left) and tree.size[tree.right[node]] == len(right)
    walk(tree, tree.left[node], lo, hi, left)
    walk(tree, tree.right[node], lo, hi, right)


@given(st.integers(0, 2**31), st.integers(2, 80), st.integers(1, 5))
@settings(max_examples=60, deadline=None)
def test_tree_invariants(seed, n, dims):
    rng = np.random.default_rng(seed)
    x = np.round(rng.normal(size=(n, dims)), 1)  # rounding forces ties and constant features
    limit = math.ceil(math.log2(n))
    tree = build_tree(x, limit, rng)
    walk(tree, 0, None, None, x)
    assert tree.depth.max() <= limit


def test_deterministic_and_thread_free():
    x = np.random.default_rng(1).normal(size=(400, 6))
    a = fit_iforest(x, 50, 128, seed=4, threads=1)
    b = fit_iforest(x, 50, 128, seed=4, threads=4)
    assert json.dumps(a.to_json()) == json.dumps(b.to_json())
    sa, sb = anomaly_scores(a, x, threads=1), anomaly_scores(b, x, threads=3)
    assert sa.tobytes() == sb.tobytes()


def test_seed_matters():
    x = np.random.default_rng(2).normal(size=(200, 3))
    assert not np.array_equal(anomaly_scores(fit_iforest(x, 20, seed=1), x),
                              anomaly_scores(fit_iforest(x, 20, seed=2), x))


def test_psi_capped_at_n():
    x = np.random.default_rng(3).normal(size=(50, 2))
    model = fit_iforest(x, 5, psi=256, seed=0)
    assert model.psi == 50 and model.c_psi == c_factor(50)
    assert model.trees[0].height_limit == math.ceil(math.log2(50))
    assert len(set(model.trees[0].sample_index)) == 50


def test_json_round_trip():
    x = np.random.default_rng(4).normal(size=(120, 3))
    model = fit_iforest(x, 10, 64, seed=5)
    back = IsolationForestModel.from_json(json.loads(json.dumps(model.to_json())))
    assert anomaly_scores(back, x).tobytes() == anomaly_scores(model, x).tobytes()


def test_raw_scores_in_open_interval():
    x = np.random.default_rng(5).normal(size=(300, 4))
    s = anomaly_scores(fit_iforest(x, 30, seed=0), x)
    assert ((s > 0) & (s < 1)).all()
    assert anomaly_score(fit_iforest(x, 30, seed=0), x[0]) == s[0]


def test_wrong_width_rejected():
    model = fit_iforest(np.zeros((10, 3)) + np.arange(10)[:, None], 3, seed=0)
    with pytest.raises(DataError):
        anomaly_scores(model, np.zeros((2, 4)))


@pytest.mark.parametrize("seed", range(3))
def test_planted_outliers(seed):
    x, y = planted_outliers(seed)
    s = anomaly_scores(fit_iforest(x, 100, 256, seed=seed), x)
    assert rank_auc(s, y) >= 0.95


def top10_hits(seed, scores_fn):
    x, y = planted_outliers(seed)
    return int(y[np.argsort(-scores_fn(x, seed))[:10]].sum())


def ours(x, seed):
    return anomaly_scores(fit_iforest(x, 100, 256, seed=seed), x)


def reference(x, seed):
    return -IsolationForest(n_estimators=100, max_samples=256, random_state=seed).fit(x).score_samples(x)


def test_top10_parity_with_reference():
    mine = np.mean([top10_hits(s, ours) for s in range(10)])
    theirs = np.mean([top10_hits(s, reference) for s in range(10)])
    assert mine >= theirs - 1.0


@pytest.mark.xfail(reason="inlier tail in 24 dims reaches radius ~7; neither this forest nor the "
                          "scikit-learn reference puts all ten radius-8 points in the top ten", strict=False)
def test_planted_outliers_fill_top10():
    assert all(top10_hits(s, ours) == 10 for s in range(3))


def test_duplicated_point_vs_far_outlier():
    wins = 0
    for t in range(100):
        rng = np.random.default_rng(t)
        cloud = rng.normal(size=(200, 3))
        dup = np.repeat(cloud[:1], 30, axis=0)
        far = rng.normal(size=(1, 3))
        far = 6 * far / np.linalg.norm(far)
        x = np.vstack([cloud, dup, far])
        s = anomaly_scores(fit_iforest(x, 50, 128, seed=t), x)
        wins += s[0] <= s[-1]
    assert wins > 50


def test_scaling():
    assert list(scale_scores([0.3, 0.5, 0.7])) == pytest.approx([0.0, 0.5, 1.0])


def test_scaling_equal_input_warns(caplog):
    with caplog.at_level(logging.WARNING):
        out = scale_scores([0.5, 0.5])
    assert (out == 0).all() and "equal" in caplog.text


@given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=50, unique=True))
def test_scaling_rank_preserving(raw):
    scaled = scale_scores(raw)
    assert (np.argsort(raw, kind="stable") == np.argsort(scaled, kind="stable")).all()
    assert scaled.min() == 0.0 and scaled.max() == 1.0


def test_input_checks():
    with pytest.raises(DataError):
        fit_iforest(np.zeros((1, 2)))
    with pytest.raises(DataError):
        fit_iforest(np.zeros((5, 2)), psi=1)
