import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.metrics import adjusted_rand_score, silhouette_score

from nasdisrupt.errors import ConfigError, DataError
from nasdisrupt.kmeans import (
    ClusterProfile, TypologyThresholds, classify_typology, fit_kmeans, flag_sweep, geographic_tags,
    longitude_band, profile_clusters, profiles_frame, silhouette, sweep_k, typology_of,
)
from nasdisrupt.kmeans import _assign, _kmeanspp

from oracles import best_partition_inertia, blobs, naive_silhouette


def test_k1_is_the_mean():
    x = np.random.default_rng(0).normal(size=(30, 3))
    m = fit_kmeans(x, 1, seed=0, restarts=2)
    assert np.allclose(m.centroids[0], x.mean(axis=0))
    assert m.inertia == pytest.approx(((x - x.mean(axis=0)) ** 2).sum())


def test_two_pairs():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]])
    m = fit_kmeans(x, 2, seed=1)
    assert m.assignments[0] == m.assignments[1] != m.assignments[2] == m.assignments[3]
    assert m.inertia == pytest.approx(best_partition_inertia(x, 2)) == pytest.approx(1.0)


def test_deterministic():
    x = np.random.default_rng(1).normal(size=(80, 4))
    a, b = fit_kmeans(x, 5, seed=9), fit_kmeans(x, 5, seed=9)
    assert (a.assignments == b.assignments).all() and a.centroids.tobytes() == b.centroids.tobytes()


def test_thread_count_does_not_matter():
    x = np.random.default_rng(2).normal(size=(120, 3))
    a, b = fit_kmeans(x, 6, seed=3, threads=1), fit_kmeans(x, 6, seed=3, threads=4)
    assert a.centroids.tobytes() == b.centroids.tobytes() and a.best_restart == b.best_restart


def test_k_above_n_rejected():
    with pytest.raises(ConfigError):
        fit_kmeans(np.zeros((3, 2)), 4, seed=0)


def test_inertia_never_increases():
    x = np.random.default_rng(3).normal(size=(200, 5))
    m = fit_kmeans(x, 7, seed=4, restarts=1)
    h = np.array(m.inertia_history)
    assert (np.diff(h) <= 1e-9 * h[0]).all()


def test_nearest_centroid_at_convergence():
    x = np.random.default_rng(4).normal(size=(150, 3))
    m = fit_kmeans(x, 5, seed=5)
    for i, p in enumerate(x):
        d = ((m.centroids - p) ** 2).sum(axis=1)
        assert d[m.assignments[i]] <= d.min() + 1e-12
    assert len(set(m.assignments)) == 5


def test_empty_cluster_repair():
    x = np.array([[0.0], [1.0], [2.0], [50.0]])
    c = np.array([[0.0], [1.0], [1000.0]])
    labels, _ = _assign(x, c.copy(), 3)
    assert set(labels) == {0, 1, 2}
    assert labels[3] == 2  # farthest point moved into the empty cluster


def test_kmeanspp_with_duplicates():
    x = np.zeros((5, 2))
    centres = _kmeanspp(x, 3, np.random.default_rng(0))
    assert centres.shape == (3, 2)


def test_exhaustive_optimum_rate():
    hits = 0
    for t in range(100):
        rng = np.random.default_rng(1000 + t)
        n, k = int(rng.integers(4, 9)), int(rng.integers(2, 4))
        x = rng.normal(size=(n, 2))
        m = fit_kmeans(x, k, seed=t, restarts=10)
        hits += m.inertia <= best_partition_inertia(x, k) * (1 + 1e-9)
    assert hits >= 95


# ---------------------------------------------------------------- silhouette


def test_silhouette_two_tight_groups():
    x = np.array([[0, 0], [0, 0.1], [0.1, 0], [0.1, 0.1], [9, 9], [9, 9.1], [9.1, 9], [9.1, 9.1]])
    labels = [0] * 4 + [1] * 4
    s = silhouette(x, labels)
    assert s > 0.9
    assert s == pytest.approx(naive_silhouette(x, labels), abs=1e-12)


def test_silhouette_identical_points():
    assert silhouette(np.ones((6, 2)), [0, 0, 0, 1, 1, 1]) == 0.0


def test_silhouette_singleton_contributes_zero():
    x = np.array([[0.0], [0.1], [0.2], [5.0]])
    labels = [0, 0, 0, 1]
    assert silhouette(x, labels) == pytest.approx(naive_silhouette(x, labels))
    assert silhouette(x, labels) == pytest.approx(silhouette_score(x, labels))


def test_silhouette_needs_two_clusters():
    with pytest.raises(DataError):
        silhouette(np.zeros((3, 2)), [0, 0, 0])


@given(st.integers(0, 2**31), st.integers(6, 40), st.integers(2, 5))
@settings(max_examples=50, deadline=None)
def test_silhouette_matches_sklearn(seed, n, k):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n, 3))
    labels = np.r_[np.arange(k), rng.integers(0, k, size=n - k)]
    assert silhouette(x, labels) == pytest.approx(silhouette_score(x, labels), abs=1e-10)


# ---------------------------------------------------------------- sweep


def blob_trial(seed, k_range=range(2, 9)):
    x, y = blobs(seed)
    model = fit_kmeans(x, 3, seed=seed)
    table = sweep_k(x, k_range, seed=seed)
    best_k = int(table.loc[table["flags"].str.contains("silhouette_max"), "k"].iloc[0])
    return adjusted_rand_score(y, model.assignments), best_k


@pytest.mark.parametrize("seed", range(3))
def test_three_blobs(seed):
    ari, best_k = blob_trial(seed)
    assert ari >= 0.95 and best_k == 3


def test_ws_non_increasing():
    x = np.random.default_rng(7).normal(size=(150, 4))
    ws = sweep_k(x, range(2, 9), seed=7)["ws"].to_numpy()
    assert (ws[1:] <= ws[:-1] * 1.01).all()


def test_single_k_sweep():
    x = np.random.default_rng(8).normal(size=(20, 2))
    table = sweep_k(x, [2], seed=0)
    assert len(table) == 1 and list(table.columns) == ["k", "silhouette", "ws", "flags"]


@pytest.mark.parametrize("ks", [[1, 2], [2, 50], []])
def test_sweep_range_checked(ks):
    with pytest.raises(ConfigError):
        sweep_k(np.zeros((10, 2)), ks, seed=0)


def test_flags():
    table = pd.DataFrame({"k": [2, 3, 4, 5, 6], "silhouette": [0.3, 0.5, 0.4, 0.45, 0.2],
                          "ws": [100.0, 40.0, 30.0, 25.0, 22.0]})
    flags = flag_sweep(table)
    assert "silhouette_max" in flags[1] and "silhouette_local_max" in flags[1]
    assert "silhouette_local_max" in flags[3] and "silhouette_max" not in flags[3]
    assert "ws_elbow" in flags[1]


# ---------------------------------------------------------------- profiles


def test_profile_fractions():
    x = np.array([[0.0], [10.0], [10.5], [11.0]])
    m = fit_kmeans(x, 2, seed=0)
    nas = pd.DataFrame({"scheduled": [100, 200, 300, 400], "cx_rate": [0.0, 0.1, 0.2, 0.3],
                        "arrd_per_flight": [1.0, 2.0, 3.0, 4.0]})
    profiles = profile_clusters(m, x, nas, [0.0, 0.5, 0.7, 0.9])
    fractions = sorted(p.fraction_days for p in profiles)
    assert fractions == [25.0, 75.0]
    assert sum(fractions) == pytest.approx(100.0, abs=0.01)
    big = max(profiles, key=lambda p: p.n_days)
    assert big.avg_cx_rate == pytest.approx(20.0)
    assert big.avg_anomaly == pytest.approx(0.7)
    assert big.concentration == pytest.approx(np.mean([0.5, 0.0, 0.5]))


def test_single_cluster_profile():
    x = np.random.default_rng(9).normal(size=(12, 2))
    m = fit_kmeans(x, 1, seed=0)
    nas = pd.DataFrame({"scheduled": [1] * 12, "cx_rate": [0.0] * 12, "arrd_per_flight": [0.0] * 12})
    (p,) = profile_clusters(m, x, nas, np.zeros(12))
    assert p.fraction_days == 100.0
    assert p.concentration == pytest.approx(np.linalg.norm(x - x.mean(axis=0), axis=1).mean())


def profile(**kw):
    base = dict(cluster_id=0, n_days=10, concentration=1.0, fraction_days=10.0, avg_anomaly=0.1,
                avg_sched_flights=100.0, avg_cx_rate=1.0, avg_arrd_per_flight=10.0)
    base.update(kw)
    return ClusterProfile(**base)


def test_typology_rules():
    t = TypologyThresholds()
    assert typology_of(profile(avg_cx_rate=20.4, avg_arrd_per_flight=41.7, avg_anomaly=0.75), t) == "NASDisruption"
    assert typology_of(profile(avg_cx_rate=11.0, avg_arrd_per_flight=36.0), t) == "NASDisruption"
    assert typology_of(profile(avg_anomaly=0.06), t) == "Smooth"
    assert typology_of(profile(avg_anomaly=0.30), t) == "RegionalDisruption"
    assert typology_of(profile(avg_anomaly=0.20), t) == "RegionalDisturbance"


def test_infinite_thresholds_all_smooth():
    inf = float("inf")
    t = TypologyThresholds(inf, inf, inf, inf, inf)
    typed = classify_typology([profile(cluster_id=i, avg_cx_rate=50.0, avg_anomaly=1.0) for i in range(3)], t)
    assert {p.typology for p in typed} == {"Smooth"}


def test_labels_are_unique():
    typed = classify_typology([profile(cluster_id=i) for i in range(3)], tags={0: "West", 1: "West", 2: "East"})
    assert [p.label for p in typed] == ["West Smooth", "West Smooth 2", "East Smooth"]


def test_longitude_bands():
    assert [longitude_band(v) for v in (-120, -95, -75)] == ["West", "Central", "East"]


def test_geographic_tags():
    cols = [(g, m) for g in ("W", "C", "E") for m in ("CX", "ArrD", "DD", "AirD")]
    z = np.zeros((6, 12))
    z[0:3, 0:2] = 3.0          # cluster 0 bad only in the west group
    z[3:6, :] = 1.0            # cluster 1 bad everywhere
    m = fit_kmeans(z, 2, seed=0)
    tags = geographic_tags(m, z, cols, {"W": -120.0, "C": -95.0, "E": -75.0})
    assert sorted(tags.values()) == ["NAS", "West"]


def test_profiles_frame_columns():
    frame = profiles_frame(classify_typology([profile()]))
    assert list(frame.columns)[:3] == ["cluster_id", "type", "label"]
