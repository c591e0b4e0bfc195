import logging

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from nasdisrupt.errors import DataError, NumericError
from nasdisrupt.features import DayFeatureMatrix, standardize
from nasdisrupt.pca import (
    PcaModel, back_project, fit_pca, heatmap_flag, jacobi_eigh, loadings_heatmap_data, project,
    select_components,
)


def standardized(rng, n, f, mix=True):
    x = rng.normal(size=(n, f))
    if mix:
        x = x @ rng.normal(size=(f, f))  # correlated columns
    return standardize(DayFeatureMatrix(list(range(n)), [(f"G{j}", "CX") for j in range(f)], x))


def pca_checks(seed, n=200, f=20):
    """(trace error, reconstruction error, round-trip error) for one random matrix."""
    rng = np.random.default_rng(seed)
    z = standardized(rng, n, f)
    model = fit_pca(z)
    cov = z.values.T @ z.values / n
    lam, v = model.eigenvalues, model.loadings.T
    trace_err = abs(lam.sum() - f)
    recon_err = float(np.abs(v @ np.diag(lam) @ v.T - cov).max())
    scores = project(model, z, f)
    trip_err = float(np.abs(back_project(model, scores) - z.values).max())
    return trace_err, recon_err, trip_err


@pytest.mark.parametrize("seed", range(5))
def test_trace_reconstruction_round_trip(seed):
    trace_err, recon_err, trip_err = pca_checks(seed)
    assert trace_err < 1e-6 and recon_err < 1e-6 and trip_err < 1e-8


@given(st.integers(0, 2**31), st.integers(2, 24))
@settings(max_examples=40, deadline=None)
def test_jacobi_matches_numpy_eigh(seed, n):
    rng = np.random.default_rng(seed)
    b = rng.normal(size=(n, n))
    a = b + b.T
    w, v, _ = jacobi_eigh(a)
    ref = np.linalg.eigh(a)[0]
    assert np.allclose(np.sort(w), ref, atol=1e-8 * max(1.0, np.abs(ref).max()))
    assert np.abs(v.T @ v - np.eye(n)).max() < 1e-8
    assert np.abs(a @ v - v * w).max() < 1e-8 * max(1.0, np.abs(a).max())


def test_jacobi_nonconvergence_reports_diagnostics():
    rng = np.random.default_rng(0)
    b = rng.normal(size=(8, 8))
    with pytest.raises(NumericError, match="did not converge: 1 sweeps"):
        jacobi_eigh(b + b.T, max_sweeps=1)


def test_model_invariants():
    rng = np.random.default_rng(11)
    model = fit_pca(standardized(rng, 50, 6))
    assert (np.diff(model.eigenvalues) <= 1e-12).all()
    assert (model.eigenvalues >= -1e-9).all()
    v = model.loadings
    assert np.abs(v @ v.T - np.eye(6)).max() < 1e-8
    assert abs(model.explained_ratio.sum() - 1) < 1e-9
    lead = np.abs(v).argmax(axis=1)
    assert (v[np.arange(6), lead] > 0).all()


def test_perfectly_correlated_pair():
    x = np.array([[1.0, 2.0], [2.0, 4.0], [3.0, 6.0], [5.0, 10.0]])
    model = fit_pca(standardize(DayFeatureMatrix(list(range(4)), [("G", "CX"), ("G", "DD")], x)))
    assert np.allclose(model.eigenvalues, [2.0, 0.0], atol=1e-8)


def test_score_variance_tracks_eigenvalue():
    rng = np.random.default_rng(3)
    z = standardized(rng, 2000, 8)
    model = fit_pca(z)
    scores = project(model, z, 8)
    var = scores.var(axis=0)
    assert np.allclose(var, model.eigenvalues, rtol=0.02)
    assert abs(var.sum() - model.eigenvalues.sum()) < 1e-6


def test_zero_row_projects_to_zero():
    rng = np.random.default_rng(4)
    model = fit_pca(standardized(rng, 30, 5))
    assert (project(model, np.zeros((1, 5)), 3) == 0).all()


def test_refit_bit_identical():
    rng = np.random.default_rng(5)
    z = standardized(rng, 60, 10)
    a, b = fit_pca(z), fit_pca(z)
    assert a.loadings.tobytes() == b.loadings.tobytes()
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()


def test_constant_columns_get_zero_loadings():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(40, 4))
    x[:, 2] = 7.0
    z = standardize(DayFeatureMatrix(list(range(40)), [(f"G{j}", "CX") for j in range(4)], x))
    model = fit_pca(z)
    assert model.loadings.shape == (3, 4)
    assert (model.loadings[:, 2] == 0).all()
    assert abs(model.eigenvalues.sum() - 3) < 1e-9


def model_with(eigs):
    eigs = np.array(eigs, dtype=float)
    return PcaModel(np.eye(len(eigs)), eigs, eigs / eigs.sum(), [(f"f{i}", "") for i in range(len(eigs))])


def test_select_by_eigenvalue():
    k, cum = select_components(model_with([3.0, 1.2, 0.9]))
    assert k == 2 and cum == pytest.approx(4.2 / 5.1)


def test_select_fallback_warns(caplog):
    with caplog.at_level(logging.WARNING):
        k, _ = select_components(model_with([0.9, 0.8]))
    assert k == 1 and "no eigenvalue" in caplog.text


def test_project_k_zero():
    with pytest.raises(DataError):
        project(model_with([2.0, 1.0]), np.zeros((1, 2)), 0)


def test_json_round_trip():
    rng = np.random.default_rng(8)
    z = standardized(rng, 30, 4)
    model = fit_pca(z)
    select_components(model)
    back = PcaModel.from_json(model.to_json())
    np.testing.assert_array_equal(back.loadings, model.loadings)
    assert back.columns == model.columns and back.n_selected == model.n_selected


def table(cx, others=0.1):
    groups = [f"G{i}" for i in range(len(cx))]
    rows = {"CX": cx, "ArrD": [others] * len(cx), "DD": [others] * len(cx), "AirD": [others] * len(cx)}
    return pd.DataFrame.from_dict(rows, orient="index", columns=groups)


def test_heatmap_flags():
    assert heatmap_flag(table([0.2] * 10, others=0.2)) == "system-wide"
    assert heatmap_flag(table([0.5] * 10, others=0.0)) == "cancellation-dominant"
    mixed = table([0.3, -0.3] * 5, others=0.0)
    mixed.loc["ArrD"] = [0.2, -0.2] * 5
    assert heatmap_flag(mixed) == "regional"


def test_heatmap_single_group():
    model = fit_pca(standardize(DayFeatureMatrix(
        list(range(10)), [("G", m) for m in ("CX", "ArrD", "DD", "AirD")],
        np.random.default_rng(9).normal(size=(10, 4)))))
    (t,) = loadings_heatmap_data(model, ["G"], 1)
    assert t.table.shape == (4, 1)
    assert list(t.table.index) == ["CX", "ArrD", "DD", "AirD"]


def test_heatmap_columns_follow_given_order():
    cols = [(g, m) for g in ("B", "A") for m in ("CX", "ArrD", "DD", "AirD")]
    z = standardize(DayFeatureMatrix(list(range(30)), cols, np.random.default_rng(10).normal(size=(30, 8))))
    model = fit_pca(z)
    tables = loadings_heatmap_data(model, ["A", "B"], 2)
    assert list(tables[0].table.columns) == ["A", "B"]
    assert tables[0].table.loc["DD", "B"] == model.loadings[0, 2]


def test_needs_two_rows():
    with pytest.raises(DataError):
        fit_pca(np.zeros((1, 3)))
