"""Principal components of the standardized day matrix.

The eigen-decomposition is a cyclic Jacobi solver. Pairs are visited in
round-robin tournament order so every round applies ``F/2`` disjoint plane
rotations at once; one sweep is ``F - 1`` rounds.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from .errors import DataError, NumericError
from .features import METRICS, DayFeatureMatrix

log = logging.getLogger(__name__)

JACOBI_TOL = 1e-10
JACOBI_MAX_SWEEPS = 60
FLAG_SIGN_SHARE = 0.9


@dataclass
class PcaModel:
    loadings: np.ndarray  # components x features, unit rows
    eigenvalues: np.ndarray
    explained_ratio: np.ndarray
    columns: list
    n_selected: int = 0
    sweeps: int = 0

    def to_json(self) -> dict:
        return {
            "eigenvalues": [float(x) for x in self.eigenvalues],
            "explained_ratio": [float(x) for x in self.explained_ratio],
            "n_selected": int(self.n_selected),
            "cumulative_selected": float(self.explained_ratio[: self.n_selected].sum()),
            "columns": [f"{g}:{m}" for g, m in self.columns],
            "n_components": int(self.loadings.shape[0]),
            "loadings": [float(x) for x in self.loadings.ravel()],
            "jacobi_sweeps": int(self.sweeps),
        }

    @classmethod
    def from_json(cls, d: dict) -> "PcaModel":
        cols = [tuple(c.rsplit(":", 1)) for c in d["columns"]]
        loadings = np.array(d["loadings"], dtype=float).reshape(d["n_components"], len(cols))
        return cls(loadings, np.array(d["eigenvalues"]), np.array(d["explained_ratio"]),
                   cols, d["n_selected"], d.get("jacobi_sweeps", 0))


def _round_robin(m: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Pairings of ``m`` (even) indices into ``m - 1`` rounds of disjoint pairs."""
    ring = list(range(1, m))
    rounds = []
    for _ in range(m - 1):
        order = [0] + ring
        p = np.array(order[: m // 2])
        q = np.array(order[m // 2:][::-1])
        rounds.append((np.minimum(p, q), np.maximum(p, q)))
        ring = ring[-1:] + ring[:-1]
    return rounds


def jacobi_eigh(a: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Eigenvalues and column eigenvectors of a real symmetric matrix.

    Converges when the largest off-diagonal magnitude is at most ``tol``
    times ``max(1, ||a||_F)``. Returns ``(w, v, sweeps)`` unsorted.
    """
    a = np.array(a, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n):
        raise DataError("jacobi_eigh needs a square matrix")
    if n == 1:
        return a.diagonal().copy(), np.ones((1, 1)), 0
    m = n + (n % 2)
    A = np.zeros((m, m))
    A[:n, :n] = (a + a.T) / 2
    V = np.eye(m)
    scale = max(1.0, float(np.sqrt((A ** 2).sum())))
    rounds = _round_robin(m)
    offdiag = ~np.eye(m, dtype=bool)

    for sweep in range(1, max_sweeps + 1):
        for p, q in rounds:
            apq = A[p, q]
            rot = np.abs(apq) > 0.0
            if not rot.any():
                continue
            p, q, apq = p[rot], q[rot], apq[rot]
            tau = (A[q, q] - A[p, p]) / (2.0 * apq)
            t = np.sign(tau) / (np.abs(tau) + np.sqrt(1.0 + tau * tau))
            t[tau == 0] = 1.0
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = t * c
            Ap, Aq = A[:, p].copy(), A[:, q].copy()
            A[:, p] = c * Ap - s * Aq
            A[:, q] = s * Ap + c * Aq
            Ap, Aq = A[p, :].copy(), A[q, :].copy()
            A[p, :] = c[:, None] * Ap - s[:, None] * Aq
            A[q, :] = s[:, None] * Ap + c[:, None] * Aq
            A[p, q] = 0.0
            A[q, p] = 0.0
            Vp, Vq = V[:, p].copy(), V[:, q].copy()
            V[:, p] = c * Vp - s * Vq
            V[:, q] = s * Vp + c * Vq
        off = float(np.abs(A[offdiag]).max())
        if off <= tol * scale:
            return A.diagonal()[:n].copy(), V[:n, :n].copy(), sweep
    raise NumericError(f"Jacobi eigensolver did not converge: {max_sweeps} sweeps, "
                       f"max off-diagonal {off:.3e} > {tol * scale:.3e}")


def _as_array(z) -> np.ndarray:
    return z.values if isinstance(z, DayFeatureMatrix) else np.asarray(z, dtype=float)


def fit_pca(z, columns: Optional[Sequence] = None) -> PcaModel:
    """Fit on a standardized matrix via its covariance (the raw correlation)."""
    x = _as_array(z)
    if x.ndim != 2 or x.shape[0] < 2 or x.shape[1] < 1:
        raise DataError("PCA needs at least 2 rows and 1 column")
    if columns is None:
        columns = list(z.columns) if isinstance(z, DayFeatureMatrix) else [(f"f{j}", "") for j in range(x.shape[1])]
    n, F = x.shape
    if isinstance(z, DayFeatureMatrix) and z.constant is not None:
        keep = ~np.asarray(z.constant)
    else:
        keep = x.std(axis=0) >= 1e-12
    if not keep.any():
        raise DataError("every column is constant")
    xs = x[:, keep]
    xs = xs - xs.sum(axis=0) / n
    cov = xs.T @ xs / n
    w, v, sweeps = jacobi_eigh(cov)
    order = np.argsort(-w, kind="stable")
    w, v = w[order], v[:, order]
    # sign convention: each eigenvector's largest-magnitude entry is positive
    lead = np.abs(v).argmax(axis=0)
    v = v * np.where(v[lead, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    loadings = np.zeros((v.shape[1], F))
    loadings[:, keep] = v.T
    total = w.sum()
    return PcaModel(loadings, w, w / total, list(columns), sweeps=sweeps)


def select_components(model: PcaModel, threshold: float = 1.0) -> tuple[int, float]:
    """Keep components whose eigenvalue exceeds ``threshold``.

    Returns ``(count, cumulative explained ratio)`` and records the count on
    the model. Falls back to one component when none qualifies.
    """
    k = int((model.eigenvalues > threshold).sum())
    if k == 0:
        log.warning("no eigenvalue above %s; keeping the first component", threshold)
        k = 1
    model.n_selected = k
    return k, float(model.explained_ratio[:k].sum())


def project(model: PcaModel, z, k: int) -> np.ndarray:
    if k < 1:
        raise DataError("projection needs k >= 1")
    if k > model.loadings.shape[0]:
        raise DataError(f"k={k} exceeds {model.loadings.shape[0]} components")
    return _as_array(z) @ model.loadings[:k].T


def back_project(model: PcaModel, scores: np.ndarray) -> np.ndarray:
    k = scores.shape[1]
    return scores @ model.loadings[:k]


@dataclass
class HeatmapTable:
    component: int
    table: pd.DataFrame  # index: metric, columns: group ids west to east
    flag: str


def heatmap_flag(table: pd.DataFrame) -> str:
    """Mechanised reading of a loadings table."""
    vals = table.to_numpy().ravel()
    nz = vals[vals != 0]
    if nz.size == 0:
        return "regional"
    cx = table.loc["CX"].to_numpy() if "CX" in table.index else np.zeros(0)
    cx_nz = cx[cx != 0]
    cx_mass = float((cx ** 2).sum() / (nz ** 2).sum())
    if cx_nz.size and cx_mass >= 0.5:
        share = max((cx_nz > 0).mean(), (cx_nz < 0).mean())
        if share >= FLAG_SIGN_SHARE:
            return "cancellation-dominant"
    if max((nz > 0).mean(), (nz < 0).mean()) >= FLAG_SIGN_SHARE:
        return "system-wide"
    return "regional"


def loadings_heatmap_data(model: PcaModel, group_order: Sequence[str], k: int) -> list[HeatmapTable]:
    index = {c: j for j, c in enumerate(model.columns)}
    out = []
    for comp in range(min(k, model.loadings.shape[0])):
        grid = np.zeros((len(METRICS), len(group_order)))
        for r, metric in enumerate(METRICS):
            for c, gid in enumerate(group_order):
                j = index.get((gid, metric))
                if j is not None:
                    grid[r, c] = model.loadings[comp, j]
        table = pd.DataFrame(grid, index=list(METRICS), columns=list(group_order))
        table.index.name = "metric"
        out.append(HeatmapTable(comp + 1, table, heatmap_flag(table)))
    return out
