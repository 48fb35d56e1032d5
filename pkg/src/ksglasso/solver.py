"""Proximal Newton solver for the penalized Kronecker-sum objective.

Each outer iteration eigendecomposes the two small graphs, forms the
gradient and a Hessian representation, restricts attention to the active
coordinates, solves the L1-penalized quadratic model by coordinate descent,
and backtracks along the resulting direction under an Armijo rule with a
positive-definiteness guard. The unidentifiable diagonal gauge is left free
during the iterations and pinned once at the end via the trace ratio.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from . import _cd
from .core import (
    EigenSystem,
    Gradient,
    KsModel,
    SampleStats,
    adjust_trace_ratio,
    gradient,
    penalty,
    symmetrize,
)
from .exceptions import InputError, LineSearchError, NumericalError
from .hessian import ApproxHessianRep, ExactHessianRep, build_approx, build_exact

ZERO_DIRECTION_TOL = 1e-12


def default_sweep_schedule(t: int) -> int:
    """Inner CD sweeps at Newton iteration t: cheap early, accurate late."""
    return min(1 + t // 3, 20)


@dataclass
class SolverConfig:
    """Hyperparameters of one solver run. k_trunc = 0 selects the exact
    Hessian; k_trunc >= 1 the truncated one with that many factors."""

    gamma_theta: float
    gamma_psi: float
    k_trunc: int = 1
    rho: Optional[float] = None          # None -> q / p at fit time
    epsilon: float = 1e-3
    consecutive_required: int = 3
    max_newton_iters: int = 100
    sigma: float = 1e-3
    beta: float = 0.5
    max_backtracks: int = 40
    sweep_schedule: Callable[[int], int] = default_sweep_schedule
    rng_seed: int = 0
    screening: bool = False
    # instrumentation knobs used by equivalence / convergence-rate tests
    adjust_each_iteration: bool = False
    keep_iterates: bool = False

    def __post_init__(self):
        if self.gamma_theta <= 0 or self.gamma_psi <= 0:
            raise InputError("regularization strengths must be positive")
        if self.k_trunc < 0:
            raise InputError("k_trunc must be 0 (exact) or a positive truncation")
        if self.rho is not None and self.rho <= 0:
            raise InputError("trace ratio must be positive")
        if not 0 < self.sigma < 0.5:
            raise InputError("sigma must lie in (0, 0.5)")
        if not 0 < self.beta < 1:
            raise InputError("beta must lie in (0, 1)")
        if self.epsilon <= 0 or self.max_backtracks < 1:
            raise InputError("epsilon must be positive, max_backtracks >= 1")
        if self.consecutive_required < 1 or self.max_newton_iters < 1:
            raise InputError("iteration counts must be positive")

    def with_gammas(self, gamma: float) -> "SolverConfig":
        return replace(self, gamma_theta=gamma, gamma_psi=gamma)


@dataclass(frozen=True)
class DirectionPair:
    d_theta: np.ndarray
    d_psi: np.ndarray

    def max_abs(self) -> float:
        return max(
            float(np.abs(self.d_theta).max(initial=0.0)),
            float(np.abs(self.d_psi).max(initial=0.0)),
        )


@dataclass(frozen=True)
class ActiveSets:
    """Upper-triangle coordinates free to move this iteration."""

    a_theta: np.ndarray   # (m, 2) int64 with i <= j, diagonals always present
    a_psi: np.ndarray

    @property
    def size_theta(self) -> int:
        return self.a_theta.shape[0]

    @property
    def size_psi(self) -> int:
        return self.a_psi.shape[0]


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    f: float
    g: float
    h: float
    alpha: float
    active_theta: int
    active_psi: int
    backtracks: int
    seconds: float


@dataclass
class SolverTrace:
    f_init: float
    records: list[IterationRecord] = field(default_factory=list)
    termination_reason: str = ""
    iterates: list[tuple[np.ndarray, np.ndarray]] = field(default_factory=list)

    @property
    def f_values(self) -> list[float]:
        return [r.f for r in self.records]

    def relative_drops(self, last: Optional[int] = None) -> list[float]:
        fs = [self.f_init] + self.f_values
        start = 1 if last is None else max(1, len(fs) - last)
        return [
            abs(fs[t] - fs[t - 1]) / max(abs(fs[t]), np.finfo(float).tiny)
            for t in range(start, len(fs))
        ]


@dataclass(frozen=True)
class LineSearchResult:
    alpha: float
    f_new: float
    g_new: float
    h_new: float
    eig_theta: EigenSystem
    eig_psi: EigenSystem
    backtracks: int


# ---------------------------------------------------------------------------
# active sets and screening
# ---------------------------------------------------------------------------

def _upper_pairs(mask: np.ndarray) -> np.ndarray:
    ii, jj = np.nonzero(np.triu(mask))
    return np.column_stack([ii, jj]).astype(np.int64)


def detect_active_sets(
    model: KsModel,
    grad: Gradient,
    cfg: SolverConfig,
    fixed_zero_theta: Optional[np.ndarray] = None,
    fixed_zero_psi: Optional[np.ndarray] = None,
) -> ActiveSets:
    """Current nonzeros plus gradient violators, plus every diagonal.

    Entries in a permanent fixed-zero mask (from block screening) are held
    at zero regardless of their gradient.
    """
    p, q = model.p, model.q

    def build(mat, g, thresh, fixed, n):
        mask = (mat != 0.0) | (np.abs(g) > thresh)
        mask |= np.eye(n, dtype=bool)
        if fixed is not None:
            mask &= ~fixed
            mask |= np.eye(n, dtype=bool)
        return _upper_pairs(mask)

    return ActiveSets(
        a_theta=build(
            model.theta, grad.g_theta, q * cfg.gamma_theta, fixed_zero_theta, p
        ),
        a_psi=build(model.psi, grad.g_psi, p * cfg.gamma_psi, fixed_zero_psi, q),
    )


def _threshold_components(mat: np.ndarray, gamma: float) -> np.ndarray:
    """Component label per node of the graph {(i,j): |mat_ij| > gamma, i != j}."""
    adj = np.abs(mat) > gamma
    np.fill_diagonal(adj, False)
    _, labels = connected_components(csr_matrix(adj), directed=False)
    return labels


def screen_blocks(
    stats: SampleStats, cfg: SolverConfig
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Connected components of the thresholded sample covariances.

    Cross-component entries of the corresponding graph are exactly zero at
    the optimum, so they can be fixed to zero before solving.
    """
    parts = []
    for mat, gamma in ((stats.s_mat, cfg.gamma_theta), (stats.t_mat, cfg.gamma_psi)):
        labels = _threshold_components(mat, gamma)
        parts.append([np.nonzero(labels == c)[0] for c in range(labels.max() + 1)])
    return parts[0], parts[1]


def partition_fixed_mask(partition: list[np.ndarray], n: int) -> np.ndarray:
    """Boolean mask of entries that cross components (forced zeros)."""
    labels = np.empty(n, dtype=np.int64)
    for c, members in enumerate(partition):
        labels[members] = c
    return labels[:, None] != labels[None, :]


# ---------------------------------------------------------------------------
# coordinate descent direction
# ---------------------------------------------------------------------------

def _coef_matrices(v_stack: np.ndarray, weights: np.ndarray):
    """Quadratic coefficients: pair coefficient matrix and diagonal vector."""
    diags = v_stack.diagonal(axis1=1, axis2=2)
    a_off = np.einsum("m,mij->ij", weights, v_stack**2) + np.einsum(
        "m,mi,mj->ij", weights, diags, diags
    )
    a_diag = np.einsum("m,mi->i", weights, diags**2)
    return np.ascontiguousarray(a_off), np.ascontiguousarray(a_diag)


def cd_direction(
    model: KsModel,
    stats: SampleStats,
    grad: Gradient,
    hess_rep,
    active: ActiveSets,
    sweeps: int,
    rng: np.random.Generator,
    gamma_theta: float,
    gamma_psi: float,
) -> DirectionPair:
    """Minimize the penalized quadratic model over the active coordinates.

    Runs `sweeps` full passes over the union of both active sets in a
    seeded random permutation order, applying the closed-form single
    coordinate update. Exact representations couple the two blocks through
    the squared inverse eigenvalue-sum grid; truncated ones do not.
    """
    if stats.p != model.p or stats.q != model.q:
        raise InputError("stats dimensions do not match model")
    p, q = model.p, model.q
    exact = isinstance(hess_rep, ExactHessianRep)
    if not exact and not isinstance(hess_rep, ApproxHessianRep):
        raise InputError(f"unsupported Hessian representation: {type(hess_rep)!r}")

    v_th = np.ascontiguousarray(hess_rep.v_theta)
    v_ps = np.ascontiguousarray(hess_rep.v_psi)
    w_th = hess_rep.weights_theta
    w_ps = hess_rep.weights_psi
    a_off_th, a_diag_th = _coef_matrices(v_th, w_th)
    a_off_ps, a_diag_ps = _coef_matrices(v_ps, w_ps)

    if exact:
        lam2 = np.ascontiguousarray(hess_rep.lam_w**2)
        q_th = np.ascontiguousarray(hess_rep.eig_theta.q_mat)
        q_ps = np.ascontiguousarray(hess_rep.eig_psi.q_mat)
    else:
        lam2 = np.zeros((1, 1))
        q_th = np.zeros((1, 1))
        q_ps = np.zeros((1, 1))

    n_th = active.size_theta
    coords = np.concatenate([active.a_theta, active.a_psi], axis=0)
    sides = np.concatenate(
        [np.zeros(n_th, dtype=np.int64), np.ones(active.size_psi, dtype=np.int64)]
    )
    n_coords = coords.shape[0]
    sweeps = max(int(sweeps), 1)
    perms = np.empty((sweeps, n_coords), dtype=np.int64)
    for s in range(sweeps):
        perms[s] = rng.permutation(n_coords)

    d_th = np.zeros((p, p))
    d_ps = np.zeros((q, q))
    vd_th = np.zeros_like(v_th)
    vd_ps = np.zeros_like(v_ps)

    status = _cd.run_cd_sweeps(
        sides,
        np.ascontiguousarray(coords[:, 0]),
        np.ascontiguousarray(coords[:, 1]),
        perms,
        np.ascontiguousarray(grad.g_theta),
        np.ascontiguousarray(model.theta),
        v_th,
        w_th,
        a_off_th,
        a_diag_th,
        q * gamma_theta,
        np.ascontiguousarray(grad.g_psi),
        np.ascontiguousarray(model.psi),
        v_ps,
        w_ps,
        a_off_ps,
        a_diag_ps,
        p * gamma_psi,
        exact,
        lam2,
        q_th,
        q_ps,
        d_th,
        d_ps,
        vd_th,
        vd_ps,
    )
    if status != 0:
        raise NumericalError(
            "non-positive quadratic coefficient in coordinate descent; "
            "Hessian representation is corrupted"
        )
    return DirectionPair(symmetrize(d_th), symmetrize(d_ps))


# ---------------------------------------------------------------------------
# line search
# ---------------------------------------------------------------------------

def directional_delta(
    model: KsModel,
    d: DirectionPair,
    grad: Gradient,
    cfg: SolverConfig,
    p: int,
    q: int,
) -> float:
    """Armijo slope: <D, G> plus the penalty change at the full step."""
    lin = float(np.sum(d.d_theta * grad.g_theta) + np.sum(d.d_psi * grad.g_psi))
    h_new = penalty(
        model.theta + d.d_theta, model.psi + d.d_psi,
        cfg.gamma_theta, cfg.gamma_psi, p, q,
    )
    h_old = penalty(model.theta, model.psi, cfg.gamma_theta, cfg.gamma_psi, p, q)
    return lin + h_new - h_old


def line_search(
    model: KsModel,
    stats: SampleStats,
    d: DirectionPair,
    grad: Gradient,
    cfg: SolverConfig,
) -> LineSearchResult:
    """Backtracking Armijo search along the Newton direction.

    Each trial eigendecomposes the two updated small matrices; the
    factorization answers the positive-definiteness test, evaluates the
    objective, and is handed back so the next Newton iteration reuses it.
    """
    from .core import eigendecompose_trusted, smooth_objective

    p, q = model.p, model.q
    delta = directional_delta(model, d, grad, cfg, p, q)
    f_cur = (
        smooth_objective(stats, model.theta, model.psi, model.eig_theta, model.eig_psi)
        + penalty(model.theta, model.psi, cfg.gamma_theta, cfg.gamma_psi, p, q)
    )

    alpha = 1.0
    trials = []
    for backtracks in range(cfg.max_backtracks):
        theta_new = symmetrize(model.theta + alpha * d.d_theta)
        psi_new = symmetrize(model.psi + alpha * d.d_psi)
        eig_t = eigendecompose_trusted(theta_new)
        eig_p = eigendecompose_trusted(psi_new)
        min_sum = float(eig_t.lam[0] + eig_p.lam[0])
        if min_sum > 0.0:
            g_new = smooth_objective(stats, theta_new, psi_new, eig_t, eig_p)
            h_new = penalty(theta_new, psi_new, cfg.gamma_theta, cfg.gamma_psi, p, q)
            f_new = g_new + h_new
            if f_new <= f_cur + alpha * cfg.sigma * delta:
                return LineSearchResult(
                    alpha, f_new, g_new, h_new, eig_t, eig_p, backtracks
                )
            trials.append((alpha, min_sum, f_new))
        else:
            trials.append((alpha, min_sum, np.nan))
        alpha *= cfg.beta
    detail = ", ".join(
        f"(alpha={a:.3g}, min_sum={m:.3g}, f={fv:.6g})" for a, m, fv in trials[-5:]
    )
    raise LineSearchError(
        f"no acceptable step after {cfg.max_backtracks} backtracks; "
        f"delta={delta:.6g}, f={f_cur:.6g}, last trials: {detail}"
    )


# ---------------------------------------------------------------------------
# outer Newton loop
# ---------------------------------------------------------------------------

def check_convergence(trace: SolverTrace, cfg: SolverConfig) -> bool:
    """True iff the last `consecutive_required` relative drops are below eps."""
    if len(trace.records) < cfg.consecutive_required:
        return False
    drops = trace.relative_drops(last=cfg.consecutive_required)
    return all(r < cfg.epsilon for r in drops)


def _build_hessian_rep(model: KsModel, cfg: SolverConfig):
    if cfg.k_trunc == 0:
        return build_exact(model)
    return build_approx(model, min(cfg.k_trunc, min(model.p, model.q)))


def fit(stats: SampleStats, cfg: SolverConfig) -> tuple[KsModel, SolverTrace]:
    """Estimate the two graphs from sufficient statistics.

    Starts from the identity pair, iterates Newton steps until the relative
    objective decrease stays below cfg.epsilon for cfg.consecutive_required
    iterations (or the iteration cap), then pins the diagonal gauge once by
    shifting to the requested trace ratio.
    """
    stats.validate()
    p, q = stats.p, stats.q
    rho = cfg.rho if cfg.rho is not None else q / p
    rng = np.random.default_rng(cfg.rng_seed)

    fixed_theta = fixed_psi = None
    if cfg.screening:
        part_theta, part_psi = screen_blocks(stats, cfg)
        fixed_theta = partition_fixed_mask(part_theta, p)
        fixed_psi = partition_fixed_mask(part_psi, q)

    theta = np.eye(p)
    psi = np.eye(q)
    eig_t = EigenSystem(np.eye(p), np.ones(p))
    eig_p = EigenSystem(np.eye(q), np.ones(q))
    model = KsModel(theta, psi, eig_t, eig_p)

    from .core import smooth_objective

    g_val = smooth_objective(stats, theta, psi, eig_t, eig_p)
    h_val = penalty(theta, psi, cfg.gamma_theta, cfg.gamma_psi, p, q)
    f_val = g_val + h_val
    trace = SolverTrace(f_init=f_val)

    for t in range(cfg.max_newton_iters):
        tic = time.perf_counter()
        grad = gradient(stats, model)
        rep = _build_hessian_rep(model, cfg)
        active = detect_active_sets(model, grad, cfg, fixed_theta, fixed_psi)
        sweeps = cfg.sweep_schedule(t)
        try:
            d = cd_direction(
                model, stats, grad, rep, active, sweeps, rng,
                cfg.gamma_theta, cfg.gamma_psi,
            )
            if d.max_abs() <= ZERO_DIRECTION_TOL:
                alpha, backtracks = 0.0, 0
            else:
                result = line_search(model, stats, d, grad, cfg)
                alpha, backtracks = result.alpha, result.backtracks
                model = KsModel(
                    symmetrize(model.theta + alpha * d.d_theta),
                    symmetrize(model.psi + alpha * d.d_psi),
                    result.eig_theta,
                    result.eig_psi,
                )
                f_val, g_val, h_val = result.f_new, result.g_new, result.h_new
        except (LineSearchError, NumericalError) as exc:
            raise type(exc)(f"iteration {t}: {exc}") from exc
        if not np.isfinite(f_val):
            raise NumericalError(f"iteration {t}: objective became non-finite")

        if cfg.adjust_each_iteration:
            model = adjust_trace_ratio(model, rho)

        trace.records.append(
            IterationRecord(
                iteration=t,
                f=f_val,
                g=g_val,
                h=h_val,
                alpha=alpha,
                active_theta=active.size_theta,
                active_psi=active.size_psi,
                backtracks=backtracks,
                seconds=time.perf_counter() - tic,
            )
        )
        if cfg.keep_iterates:
            trace.iterates.append((model.theta.copy(), model.psi.copy()))
        if check_convergence(trace, cfg):
            trace.termination_reason = "converged"
            break
    else:
        trace.termination_reason = "max_iters"

    model = adjust_trace_ratio(model, rho)
    return model, trace

