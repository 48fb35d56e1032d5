"""Support-recovery metrics, information-criterion selection, error norms."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import KsModel, SampleStats, adjust_trace_ratio, objective
from .exceptions import InputError, KsglassoError
from .solver import SolverConfig, fit

EDGE_EPS = 1e-8   # |value| above this counts as an edge (guards float dust)


@dataclass(frozen=True)
class PRPoint:
    """Support recovery at one regularization level, pooled over both graphs."""

    gamma: float
    precision: float
    recall: float
    nnz_theta: int
    nnz_psi: int
    error: Optional[str] = None


def support_edges(mat: np.ndarray) -> set[tuple[int, int]]:
    """Upper-triangle off-diagonal support as a set of (i, j) pairs."""
    ii, jj = np.nonzero(np.triu(np.abs(mat) > EDGE_EPS, k=1))
    return set(zip(ii.tolist(), jj.tolist()))


def precision_recall(est_theta, est_psi, true_theta, true_psi):
    """Pooled precision/recall over both graphs' off-diagonal supports.

    An empty estimate has precision 1 by convention, so fully-thresholded
    grid endpoints stay plottable.
    """
    est = {("t",) + e for e in support_edges(est_theta)} | {
        ("p",) + e for e in support_edges(est_psi)
    }
    true = {("t",) + e for e in support_edges(true_theta)} | {
        ("p",) + e for e in support_edges(true_psi)
    }
    hits = len(est & true)
    precision = hits / len(est) if est else 1.0
    recall = hits / len(true) if true else 1.0
    return precision, recall


def pr_curve(
    stats: SampleStats,
    truth: tuple[np.ndarray, np.ndarray],
    gamma_grid: Sequence[float],
    cfg_base: SolverConfig,
) -> list[PRPoint]:
    """One fit per gamma (shared across both penalties); failures annotate
    their grid point instead of aborting the curve."""
    if len(gamma_grid) == 0:
        raise InputError("gamma grid must be non-empty")
    true_theta, true_psi = truth
    if true_theta.shape[0] != stats.p or true_psi.shape[0] != stats.q:
        raise InputError("truth dimensions do not match stats")
    points = []
    for gamma in gamma_grid:
        try:
            model, _ = fit(stats, cfg_base.with_gammas(float(gamma)))
        except KsglassoError as exc:
            points.append(
                PRPoint(float(gamma), np.nan, np.nan, 0, 0, error=str(exc))
            )
            continue
        prec, rec = precision_recall(model.theta, model.psi, true_theta, true_psi)
        points.append(
            PRPoint(
                float(gamma),
                prec,
                rec,
                2 * len(support_edges(model.theta)),
                2 * len(support_edges(model.psi)),
            )
        )
    return points


def pr_auc(points: Sequence[PRPoint]) -> float:
    """Trapezoidal area under the PR points over recall in [0, 1].

    Points are sorted by recall; the curve is anchored at (0, 1) per the
    empty-estimate convention and extended flat to recall 1 when the grid
    does not reach it.
    """
    usable = [(p.recall, p.precision) for p in points if p.error is None]
    if not usable:
        return float("nan")
    pts = sorted(usable)
    rs = [0.0] + [r for r, _ in pts]
    ps = [1.0] + [p for _, p in pts]
    if rs[-1] < 1.0:
        rs.append(1.0)
        ps.append(ps[-1])
    return float(np.trapezoid(ps, rs))


def true_edge_density(true_theta: np.ndarray, true_psi: np.ndarray) -> float:
    """Fraction of possible off-diagonal edges present in the truth."""
    p, q = true_theta.shape[0], true_psi.shape[0]
    possible = p * (p - 1) // 2 + q * (q - 1) // 2
    actual = len(support_edges(true_theta)) + len(support_edges(true_psi))
    return actual / possible


def bic(stats: SampleStats, model: KsModel) -> float:
    """Gaussian-likelihood information criterion; lower is better.

    Twice the unpenalized negative log-likelihood plus a complexity charge
    of log(max(n, 2)) per free parameter (one per off-diagonal edge, one per
    diagonal entry).
    """
    _, g_unpen, _ = objective(stats, model, 1.0, 1.0)
    nnz_off_theta = int(np.count_nonzero(np.abs(model.theta) > EDGE_EPS)) - model.p
    nnz_off_psi = int(np.count_nonzero(np.abs(model.psi) > EDGE_EPS)) - model.q
    n_params = nnz_off_theta / 2 + nnz_off_psi / 2 + model.p + model.q
    return 2.0 * stats.n * g_unpen + np.log(max(stats.n, 2)) * n_params


def error_norm(model: KsModel, reference: KsModel, rho: float) -> float:
    """Stacked 2-norm of the parameter differences after gauge fixing both
    sides to the same trace ratio."""
    if model.p != reference.p or model.q != reference.q:
        raise InputError("model and reference dimensions differ")
    a = adjust_trace_ratio(model, rho)
    b = adjust_trace_ratio(reference, rho)
    return float(
        np.sqrt(
            np.sum((a.theta - b.theta) ** 2) + np.sum((a.psi - b.psi) ** 2)
        )
    )


def error_series(
    trace_iterates: Sequence[tuple[np.ndarray, np.ndarray]],
    reference: KsModel,
    rho: float,
) -> np.ndarray:
    """Gauge-fixed distance to the reference for every stored iterate."""
    from .core import trace_shift

    ref = adjust_trace_ratio(reference, rho)
    out = []
    for theta, psi in trace_iterates:
        c = trace_shift(theta, psi, rho)
        eye_p = np.eye(theta.shape[0])
        eye_q = np.eye(psi.shape[0])
        d_theta = theta + c * eye_p - ref.theta
        d_psi = psi - c * eye_q - ref.psi
        out.append(np.sqrt(np.sum(d_theta**2) + np.sum(d_psi**2)))
    return np.asarray(out)
