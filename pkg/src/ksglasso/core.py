"""Symmetric-matrix primitives for the Kronecker-sum Gaussian model.

The model couples a p x p feature graph `theta` with a q x q sample graph
`psi`; their Kronecker sum ``theta (+) psi = kron(theta, I_q) + kron(I_p, psi)``
is the pq x pq inverse covariance of the vectorized q x p observations.
Everything downstream (objective, gradient, Hessians) is computed from the
two small eigendecompositions, never from the inflated pq x pq matrix; the
dense-matrix routines in here exist as test-scale oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    DegenerateGaugeError,
    InputError,
    NotPositiveDefiniteError,
    NumericalError,
    ResourceLimitError,
)

SYMMETRY_RTOL = 1e-12
KRON_DENSE_CAP = 10_000     # largest pq for which dense Omega may be formed
GRADIENT_ORACLE_CAP = 200   # largest pq for the dense-W gradient oracle


# ---------------------------------------------------------------------------
# validation helpers
# ---------------------------------------------------------------------------

def as_sym_matrix(values, name: str = "matrix") -> np.ndarray:
    """Validate and return a dense symmetric matrix as float64.

    Raises InputError if the input is not square, has non-finite entries,
    or deviates from symmetry by more than the declared tolerance. The
    returned array is exactly symmetric (average of the two triangles).
    """
    m = np.asarray(values, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InputError(f"{name} must be square, got shape {m.shape}")
    if m.shape[0] == 0:
        raise InputError(f"{name} must be non-empty")
    if not np.all(np.isfinite(m)):
        raise InputError(f"{name} contains non-finite entries")
    tol = SYMMETRY_RTOL * max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > tol:
        raise InputError(f"{name} is not symmetric within tolerance {tol:g}")
    return symmetrize(m)


def symmetrize(m: np.ndarray) -> np.ndarray:
    """(m + m.T) / 2, used after every update that could drift off symmetry."""
    return (m + m.T) / 2.0


def offdiag_l1(m: np.ndarray) -> float:
    """Sum of |m_ij| over i != j."""
    return float(np.abs(m).sum() - np.abs(np.diag(m)).sum())


# ---------------------------------------------------------------------------
# eigensystems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenSystem:
    """Full eigendecomposition of a symmetric matrix.

    q_mat columns are orthonormal eigenvectors, lam holds the matching
    eigenvalues in ascending order.
    """

    q_mat: np.ndarray
    lam: np.ndarray

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    def reconstruct(self) -> np.ndarray:
        return symmetrize((self.q_mat * self.lam) @ self.q_mat.T)

    def shifted(self, c: float) -> "EigenSystem":
        """Eigensystem of ``m + c*I``: same basis, shifted eigenvalues."""
        return EigenSystem(self.q_mat, self.lam + c)

    def max_orthonormality_defect(self) -> float:
        return float(np.abs(self.q_mat.T @ self.q_mat - np.eye(self.n)).max())


def eigendecompose(m: np.ndarray) -> EigenSystem:
    """Eigendecompose a symmetric matrix, eigenvalues ascending.

    Uses LAPACK's QR-iteration driver, which is deterministic and whose
    cost is dominated by the cubic reduction/accumulation work across the
    matrix sizes this package targets.
    """
    return eigendecompose_trusted(as_sym_matrix(m))


def eigendecompose_trusted(m: np.ndarray) -> EigenSystem:
    """Eigendecompose without input validation; m must already be symmetric."""
    try:
        lam, q = scipy.linalg.eigh(m, driver="ev", check_finite=False)
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        absm = np.abs(m)
        raise NumericalError(
            f"symmetric eigensolver failed on {m.shape[0]}x{m.shape[0]} matrix "
            f"(max |entry| {absm.max():.3e}, trace {np.trace(m):.3e}): {exc}"
        ) from exc
    return EigenSystem(np.ascontiguousarray(q), lam)


def pair_sums(eig_theta: EigenSystem, eig_psi: EigenSystem) -> np.ndarray:
    """p x q grid of eigenvalue sums lam_theta[l] + lam_psi[k]."""
    return eig_theta.lam[:, None] + eig_psi.lam[None, :]


# ---------------------------------------------------------------------------
# model and sufficient statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class KsModel:
    """Parameter pair (theta, psi) with cached eigensystems.

    Instances are immutable; the factory validates that the Kronecker sum
    is positive definite (the individual matrices need not be).
    """

    theta: np.ndarray
    psi: np.ndarray
    eig_theta: EigenSystem
    eig_psi: EigenSystem

    @classmethod
    def create(cls, theta, psi) -> "KsModel":
        theta = as_sym_matrix(theta, "theta")
        psi = as_sym_matrix(psi, "psi")
        eig_t = eigendecompose(theta)
        eig_p = eigendecompose(psi)
        model = cls(theta, psi, eig_t, eig_p)
        if model.min_pair_sum() <= 0.0:
            raise NotPositiveDefiniteError(
                "theta (+) psi is not positive definite: "
                f"min eigenvalue sum {model.min_pair_sum():.3e}"
            )
        return model

    @property
    def p(self) -> int:
        return self.theta.shape[0]

    @property
    def q(self) -> int:
        return self.psi.shape[0]

    def min_pair_sum(self) -> float:
        return float(self.eig_theta.lam[0] + self.eig_psi.lam[0])

    @property
    def cache_valid(self) -> bool:
        """True when the cached eigensystems reconstruct theta and psi."""
        for eig, mat in ((self.eig_theta, self.theta), (self.eig_psi, self.psi)):
            scale = max(1.0, float(np.abs(mat).max()))
            if np.abs(eig.reconstruct() - mat).max() > 1e-8 * scale:
                return False
            if eig.max_orthonormality_defect() > 1e-10:
                return False
        return True

    def with_gauge_shift(self, c: float) -> "KsModel":
        """(theta + c*I, psi - c*I): same Kronecker sum, shifted diagonals."""
        return KsModel(
            symmetrize(self.theta + c * np.eye(self.p)),
            symmetrize(self.psi - c * np.eye(self.q)),
            self.eig_theta.shifted(c),
            self.eig_psi.shifted(-c),
        )


@dataclass(frozen=True)
class SampleStats:
    """Sufficient statistics of n replicates of a q x p data matrix."""

    s_mat: np.ndarray   # p x p feature-side covariance
    t_mat: np.ndarray   # q x q sample-side covariance
    n: int
    p: int
    q: int

    def validate(self) -> None:
        for mat, name in ((self.s_mat, "s_mat"), (self.t_mat, "t_mat")):
            if np.linalg.eigvalsh(mat).min() < -1e-10:
                raise InputError(f"{name} is not positive semi-definite")
        lhs = self.q * np.trace(self.s_mat)
        rhs = self.p * np.trace(self.t_mat)
        if abs(lhs - rhs) > 1e-8 * max(abs(lhs), 1.0):
            raise InputError(
                f"trace identity violated: q*tr(S)={lhs:.12g} vs p*tr(T)={rhs:.12g}"
            )


def sample_stats(data) -> SampleStats:
    """Build SampleStats from a list of n data matrices, each q x p.

    S = sum(Y_i^T Y_i) / (n q)   (p x p),
    T = sum(Y_i Y_i^T) / (n p)   (q x q).
    """
    mats = [np.asarray(y, dtype=np.float64) for y in data]
    if not mats:
        raise InputError("need at least one data matrix")
    q, p = mats[0].shape if mats[0].ndim == 2 else (0, 0)
    if mats[0].ndim != 2:
        raise InputError("data matrices must be 2-dimensional")
    s = np.zeros((p, p))
    t = np.zeros((q, q))
    for idx, y in enumerate(mats):
        if y.shape != (q, p):
            raise InputError(
                f"replicate {idx} has shape {y.shape}, expected {(q, p)}"
            )
        if not np.all(np.isfinite(y)):
            raise InputError(f"replicate {idx} contains non-finite entries")
        s += y.T @ y
        t += y @ y.T
    n = len(mats)
    stats = SampleStats(symmetrize(s / (n * q)), symmetrize(t / (n * p)), n, p, q)
    stats.validate()
    return stats


@dataclass(frozen=True)
class Gradient:
    """Gradient of the smooth objective w.r.t. theta and psi."""

    g_theta: np.ndarray
    g_psi: np.ndarray

    def trace_gap(self) -> float:
        return abs(float(np.trace(self.g_theta) - np.trace(self.g_psi)))


# ---------------------------------------------------------------------------
# Kronecker-sum utilities and objective
# ---------------------------------------------------------------------------

def kron_sum_dense(theta: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Dense pq x pq Kronecker sum, capped at test scale."""
    theta = np.asarray(theta, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    p, q = theta.shape[0], psi.shape[0]
    if p * q > KRON_DENSE_CAP:
        raise ResourceLimitError(
            f"dense Kronecker sum of size {p * q} exceeds cap {KRON_DENSE_CAP}"
        )
    return np.kron(theta, np.eye(q)) + np.kron(np.eye(p), psi)


def ks_logdet(eig_theta: EigenSystem, eig_psi: EigenSystem) -> float:
    """log det of the Kronecker sum from the two small spectra."""
    sums = pair_sums(eig_theta, eig_psi)
    if sums.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"non-positive eigenvalue pair sum {sums.min():.3e}"
        )
    return float(np.log(sums).sum())


def objective(
    stats: SampleStats,
    model: KsModel,
    gamma_theta: float,
    gamma_psi: float,
) -> tuple[float, float, float]:
    """Penalized objective; returns (f, g, h) with f = g + h.

    g is the scaled negative log-likelihood
    ``q tr(S theta) + p tr(T psi) - log det(theta (+) psi)`` and h is the
    off-diagonal L1 penalty ``q gamma_theta |theta|_1,off + p gamma_psi
    |psi|_1,off``.
    """
    if stats.p != model.p or stats.q != model.q:
        raise InputError(
            f"stats dimensions ({stats.p},{stats.q}) do not match model "
            f"({model.p},{model.q})"
        )
    g = smooth_objective(stats, model.theta, model.psi, model.eig_theta, model.eig_psi)
    h = penalty(model.theta, model.psi, gamma_theta, gamma_psi, stats.p, stats.q)
    return g + h, g, h


def smooth_objective(stats, theta, psi, eig_theta, eig_psi) -> float:
    q, p = stats.q, stats.p
    trace_term = q * float(np.sum(stats.s_mat * theta)) + p * float(
        np.sum(stats.t_mat * psi)
    )
    return trace_term - ks_logdet(eig_theta, eig_psi)


def penalty(theta, psi, gamma_theta, gamma_psi, p, q) -> float:
    return q * gamma_theta * offdiag_l1(theta) + p * gamma_psi * offdiag_l1(psi)


# ---------------------------------------------------------------------------
# gradient: eigen form and dense oracle
# ---------------------------------------------------------------------------

def gradient(stats: SampleStats, model: KsModel) -> Gradient:
    """Gradient from the two small eigendecompositions.

    Never forms the pq x pq inverse: the theta part is
    ``q S - Q_t diag(sum_k 1/(lam_t + lam_p[k])) Q_t^T`` and symmetrically
    for psi. Cost O(p^3 + q^3 + pq).
    """
    sums = pair_sums(model.eig_theta, model.eig_psi)
    if sums.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"non-positive eigenvalue pair sum {sums.min():.3e}"
        )
    inv = 1.0 / sums
    qt, qp = model.eig_theta.q_mat, model.eig_psi.q_mat
    g_theta = stats.q * stats.s_mat - (qt * inv.sum(axis=1)) @ qt.T
    g_psi = stats.p * stats.t_mat - (qp * inv.sum(axis=0)) @ qp.T
    grad = Gradient(symmetrize(g_theta), symmetrize(g_psi))
    gap = grad.trace_gap()
    if gap > 1e-8 * (1.0 + abs(float(np.trace(grad.g_theta)))):
        raise NumericalError(f"gradient trace identity violated by {gap:.3e}")
    return grad


def collapse_theta(w: np.ndarray, p: int, q: int) -> np.ndarray:
    """Collapse a pq x pq matrix to p x p by summing each block's diagonal."""
    return w.reshape(p, q, p, q).diagonal(axis1=1, axis2=3).sum(axis=-1)


def collapse_psi(w: np.ndarray, p: int, q: int) -> np.ndarray:
    """Collapse a pq x pq matrix to q x q by summing its diagonal blocks."""
    return w.reshape(p, q, p, q).diagonal(axis1=0, axis2=2).sum(axis=-1)


def gradient_oracle(stats: SampleStats, theta, psi) -> Gradient:
    """Brute-force gradient through the dense pq x pq inverse.

    Forms W = (theta (+) psi)^-1 explicitly and collapses it: the theta
    part sums the diagonal of each q x q block, the psi part sums the
    diagonal blocks themselves. Test-scale only; cross-validates
    :func:`gradient`.
    """
    theta = as_sym_matrix(theta, "theta")
    psi = as_sym_matrix(psi, "psi")
    p, q = theta.shape[0], psi.shape[0]
    if p * q > GRADIENT_ORACLE_CAP:
        raise ResourceLimitError(
            f"gradient oracle capped at pq <= {GRADIENT_ORACLE_CAP}, got {p * q}"
        )
    omega = kron_sum_dense(theta, psi)
    if np.linalg.eigvalsh(omega).min() <= 0.0:
        raise NotPositiveDefiniteError("dense Kronecker sum is singular")
    w = np.linalg.inv(omega)
    w_theta = collapse_theta(w, p, q)
    w_psi = collapse_psi(w, p, q)
    return Gradient(
        symmetrize(q * stats.s_mat - w_theta),
        symmetrize(p * stats.t_mat - w_psi),
    )


# ---------------------------------------------------------------------------
# gauge handling (trace ratio)
# ---------------------------------------------------------------------------

def identify_diagonals(feature_sums, sample_sums, trace, rho: float):
    """Recover diag(theta) and diag(psi) from Omega's diagonal sums.

    feature_sums[j] is the sum of Omega's diagonal over feature j's q x q
    block (equals q*theta_jj + tr(psi)); sample_sums[i] is the analogous
    p-term sum for sample i; trace is tr(Omega). rho pins the gauge via
    tr(psi)/tr(theta) = rho.
    """
    feature_sums = np.asarray(feature_sums, dtype=np.float64)
    sample_sums = np.asarray(sample_sums, dtype=np.float64)
    if rho <= 0.0:
        raise InputError(f"trace ratio must be positive, got {rho}")
    p, q = feature_sums.shape[0], sample_sums.shape[0]
    tol = 1e-8 * max(1.0, abs(trace))
    if abs(feature_sums.sum() - trace) > tol or abs(sample_sums.sum() - trace) > tol:
        raise InputError(
            "inconsistent diagonal sums: per-feature total "
            f"{feature_sums.sum():.12g}, per-sample total {sample_sums.sum():.12g}, "
            f"trace {trace:.12g}"
        )
    denom = q + rho * p
    theta_diag = (feature_sums - (rho / denom) * trace) / q
    psi_diag = (sample_sums - (1.0 / denom) * trace) / p
    return theta_diag, psi_diag


def trace_shift(theta: np.ndarray, psi: np.ndarray, rho: float) -> float:
    """Scalar c such that (theta + c*I, psi - c*I) has tr(psi')/tr(theta') = rho."""
    p, q = theta.shape[0], psi.shape[0]
    return (float(np.trace(psi)) - rho * float(np.trace(theta))) / (q + rho * p)


def adjust_trace_ratio(model: KsModel, rho: float) -> KsModel:
    """Shift to the member of the equivalence class with tr(psi)/tr(theta)
    equal to rho. The Kronecker sum is unchanged exactly."""
    if rho <= 0.0:
        raise InputError(f"trace ratio must be positive, got {rho}")
    c = trace_shift(model.theta, model.psi, rho)
    new_tr_theta = float(np.trace(model.theta)) + c * model.p
    if abs(new_tr_theta) < 1e-12 * max(1.0, abs(float(np.trace(model.theta)))):
        raise DegenerateGaugeError(
            "adjusted tr(theta) is zero; the ratio gauge is undefined here"
        )
    return model.with_gauge_shift(c)
