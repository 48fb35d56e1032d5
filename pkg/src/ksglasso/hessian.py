"""Exact and approximate Hessian representations in eigen-form.

The exact Hessian of the smooth objective is never stored densely during
optimization; the coordinate-descent step only needs, per block, the list of
"resolvent" factors ``V_k = Q (Lam + lam_other[k] I)^-1 Q^T`` together with
the squared inverse eigenvalue-sum grid for the cross block. The dense
assemblies in this module are test-scale oracles that rebuild the full
(p^2+q^2) x (p^2+q^2) matrix along independent routes and cross-check them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    EigenSystem,
    KsModel,
    as_sym_matrix,
    kron_sum_dense,
    pair_sums,
)
from .exceptions import (
    InputError,
    NotPositiveDefiniteError,
    NumericalError,
    ResourceLimitError,
)

HESSIAN_ORACLE_CAP = 5   # largest p and q for the dense W-kron-W oracle


def _v_factors(eig_self: EigenSystem, lam_other: np.ndarray) -> np.ndarray:
    """Stack of V_k = Q diag(1/(lam_self + lam_other[k])) Q^T, one per k."""
    q_mat = eig_self.q_mat
    out = np.empty((lam_other.shape[0], eig_self.n, eig_self.n))
    for k, lam in enumerate(lam_other):
        inv = 1.0 / (eig_self.lam + lam)
        out[k] = (q_mat * inv) @ q_mat.T
    return out


@dataclass(frozen=True)
class ExactHessianRep:
    """Everything the exact-Hessian coordinate descent needs.

    lam_w[l, k] = 1 / (lam_theta[l] + lam_psi[k]); v_theta[k] and v_psi[l]
    are the per-eigenvalue resolvent factors. The cross block is represented
    implicitly by lam_w**2 and the two eigenvector bases.
    """

    eig_theta: EigenSystem
    eig_psi: EigenSystem
    lam_w: np.ndarray        # p x q
    v_theta: np.ndarray      # q x p x p
    v_psi: np.ndarray        # p x q x q

    @property
    def p(self) -> int:
        return self.lam_w.shape[0]

    @property
    def q(self) -> int:
        return self.lam_w.shape[1]

    @property
    def weights_theta(self) -> np.ndarray:
        return np.ones(self.q)

    @property
    def weights_psi(self) -> np.ndarray:
        return np.ones(self.p)


@dataclass(frozen=True)
class ApproxHessianRep:
    """Truncated block-diagonal Hessian: K resolvent factors per block.

    v_theta keeps the factors for the K smallest psi eigenvalues (largest
    contributions); the remaining q - K components are represented by
    repeating the K-th factor with weight tail_weight_theta. The cross
    block is dropped entirely.
    """

    k_trunc: int
    v_theta: np.ndarray      # K x p x p
    v_psi: np.ndarray        # K x q x q
    tail_weight_theta: int   # q - K
    tail_weight_psi: int     # p - K

    @property
    def p(self) -> int:
        return self.v_theta.shape[1]

    @property
    def q(self) -> int:
        return self.v_psi.shape[1]

    @property
    def weights_theta(self) -> np.ndarray:
        w = np.ones(self.k_trunc)
        w[-1] += self.tail_weight_theta
        return w

    @property
    def weights_psi(self) -> np.ndarray:
        w = np.ones(self.k_trunc)
        w[-1] += self.tail_weight_psi
        return w


def build_exact(model: KsModel) -> ExactHessianRep:
    """Exact-Hessian representation at the current model."""
    sums = pair_sums(model.eig_theta, model.eig_psi)
    if sums.min() <= 0.0:
        raise NotPositiveDefiniteError(
            f"non-positive eigenvalue pair sum {sums.min():.3e}"
        )
    return ExactHessianRep(
        eig_theta=model.eig_theta,
        eig_psi=model.eig_psi,
        lam_w=1.0 / sums,
        v_theta=_v_factors(model.eig_theta, model.eig_psi.lam),
        v_psi=_v_factors(model.eig_psi, model.eig_theta.lam),
    )


def build_approx(model: KsModel, k_trunc: int) -> ApproxHessianRep:
    """Truncated representation keeping the K smallest opposite eigenvalues."""
    p, q = model.p, model.q
    if not 1 <= k_trunc <= min(p, q):
        raise InputError(
            f"k_trunc must be in [1, min(p, q)] = [1, {min(p, q)}], got {k_trunc}"
        )
    if model.min_pair_sum() <= 0.0:
        raise NotPositiveDefiniteError("model is not positive definite")
    return ApproxHessianRep(
        k_trunc=k_trunc,
        v_theta=_v_factors(model.eig_theta, model.eig_psi.lam[:k_trunc]),
        v_psi=_v_factors(model.eig_psi, model.eig_theta.lam[:k_trunc]),
        tail_weight_theta=q - k_trunc,
        tail_weight_psi=p - k_trunc,
    )


# ---------------------------------------------------------------------------
# dense test-scale assemblies
# ---------------------------------------------------------------------------

def _selector_theta(p: int, q: int) -> np.ndarray:
    """sum_i kron(I_p, e_i, I_p, e_i), shape (p^2 q^2, p^2)."""
    out = np.zeros((p * p * q * q, p * p))
    eye_p = np.eye(p)
    for i in range(q):
        e = np.zeros((q, 1))
        e[i, 0] = 1.0
        block = np.kron(eye_p, e)
        out += np.kron(block, block)
    return out


def _selector_psi(p: int, q: int) -> np.ndarray:
    """sum_j kron(e_j, I_q, e_j, I_q), shape (p^2 q^2, q^2)."""
    out = np.zeros((p * p * q * q, q * q))
    eye_q = np.eye(q)
    for j in range(p):
        e = np.zeros((p, 1))
        e[j, 0] = 1.0
        block = np.kron(e, eye_q)
        out += np.kron(block, block)
    return out


def _oracle_selector_route(w: np.ndarray, p: int, q: int) -> np.ndarray:
    sel = np.hstack([_selector_theta(p, q), _selector_psi(p, q)])
    return sel.T @ np.kron(w, w) @ sel


def _oracle_two_stage_route(w: np.ndarray, p: int, q: int) -> np.ndarray:
    """Same Hessian via two successive block-diagonal collapses of vec(W)vec(W)^T.

    First stage produces the intermediates M_theta / M_psi by collapsing at
    the level of pq x pq cells, second stage collapses each cell like the
    gradient. The vec(.)vec(.)^T carrier makes both stages plain congruences.
    """
    vec_w = w.reshape(-1, order="F")
    eye_p, eye_q, eye_pq = np.eye(p), np.eye(q), np.eye(p * q)
    carrier = np.outer(vec_w, vec_w)

    m_theta = np.zeros((p * p * q, p * p * q))
    for j in range(q):
        e = np.zeros((q, 1))
        e[j, 0] = 1.0
        sel = np.kron(np.kron(eye_p, e), eye_pq)
        m_theta += sel.T @ carrier @ sel
    m_psi = np.zeros((p * q * q, p * q * q))
    for j in range(p):
        e = np.zeros((p, 1))
        e[j, 0] = 1.0
        sel = np.kron(np.kron(e, eye_q), eye_pq)
        m_psi += sel.T @ carrier @ sel

    carried_theta = np.zeros((p * p, p * p))
    carried_cross = np.zeros((p * q, p * q))
    for i in range(q):
        e = np.zeros((q, 1))
        e[i, 0] = 1.0
        sel = np.kron(eye_p, np.kron(eye_p, e))
        carried_theta += sel.T @ m_theta @ sel
        sel_c = np.kron(eye_q, np.kron(eye_p, e))
        carried_cross += sel_c.T @ m_psi @ sel_c
    carried_psi = np.zeros((q * q, q * q))
    for i in range(p):
        e = np.zeros((p, 1))
        e[i, 0] = 1.0
        sel = np.kron(eye_q, np.kron(e, eye_q))
        carried_psi += sel.T @ m_psi @ sel

    # map the vec-carrier index layout back to the kron layout of H
    h_theta = _uncarry_square(carried_theta, p)
    h_psi = _uncarry_square(carried_psi, q)
    h_cross = np.zeros((p * p, q * q))
    for i in range(p):
        for k in range(p):
            for j in range(q):
                for l in range(q):
                    h_cross[i * p + k, j * q + l] = carried_cross[j * p + i, l * p + k]
    top = np.hstack([h_theta, h_cross])
    bottom = np.hstack([h_cross.T, h_psi])
    return np.vstack([top, bottom])


def _uncarry_square(carried: np.ndarray, m: int) -> np.ndarray:
    """vec(A)vec(A)^T index layout -> kron(A, A) layout, summed over terms."""
    out = np.empty((m * m, m * m))
    for i in range(m):
        for k in range(m):
            for j in range(m):
                for l in range(m):
                    out[i * m + k, j * m + l] = carried[j * m + i, l * m + k]
    return out


def hessian_oracle_full(theta, psi) -> np.ndarray:
    """Dense (p^2+q^2)^2 Hessian assembled two independent ways.

    Route (a) applies the explicit selector matrices to the dense
    kron(W, W); route (b) runs the two-stage cell-level collapse. The two
    must agree to 1e-10 or the oracle refuses to answer.
    """
    theta = as_sym_matrix(theta, "theta")
    psi = as_sym_matrix(psi, "psi")
    p, q = theta.shape[0], psi.shape[0]
    if p > HESSIAN_ORACLE_CAP or q > HESSIAN_ORACLE_CAP:
        raise ResourceLimitError(
            f"hessian oracle capped at p, q <= {HESSIAN_ORACLE_CAP}, got ({p}, {q})"
        )
    omega = kron_sum_dense(theta, psi)
    if np.linalg.eigvalsh(omega).min() <= 0.0:
        raise NotPositiveDefiniteError("dense Kronecker sum is singular")
    w = np.linalg.inv(omega)
    route_a = _oracle_selector_route(w, p, q)
    route_b = _oracle_two_stage_route(w, p, q)
    gap = np.abs(route_a - route_b).max()
    if gap > 1e-10 * max(1.0, np.abs(route_a).max()):
        raise NumericalError(
            f"hessian oracle routes disagree by {gap:.3e}; oracle state corrupted"
        )
    return route_a


def dense_from_exact(rep: ExactHessianRep) -> np.ndarray:
    """Dense assembly of the eigen-form exact Hessian (test scale)."""
    p, q = rep.p, rep.q
    qt, qp = rep.eig_theta.q_mat, rep.eig_psi.q_mat
    h_theta = np.zeros((p * p, p * p))
    for k in range(q):
        v = rep.v_theta[k]
        h_theta += np.kron(v, v)
    h_psi = np.zeros((q * q, q * q))
    for l in range(p):
        v = rep.v_psi[l]
        h_psi += np.kron(v, v)
    lam2 = rep.lam_w**2
    h_cross = np.zeros((p * p, q * q))
    for l in range(p):
        left = np.outer(qt[:, l], qt[:, l]).reshape(-1)
        acc = np.zeros(q * q)
        for k in range(q):
            right = np.outer(qp[:, k], qp[:, k]).reshape(-1)
            acc += lam2[l, k] * right
        h_cross += np.outer(left, acc)
    top = np.hstack([h_theta, h_cross])
    bottom = np.hstack([h_cross.T, h_psi])
    return np.vstack([top, bottom])


def dense_from_approx(rep: ApproxHessianRep) -> np.ndarray:
    """Dense assembly of the truncated block-diagonal Hessian (test scale)."""
    p, q = rep.p, rep.q
    h_theta = np.zeros((p * p, p * p))
    for w, v in zip(rep.weights_theta, rep.v_theta):
        h_theta += w * np.kron(v, v)
    h_psi = np.zeros((q * q, q * q))
    for w, v in zip(rep.weights_psi, rep.v_psi):
        h_psi += w * np.kron(v, v)
    out = np.zeros((p * p + q * q, p * p + q * q))
    out[: p * p, : p * p] = h_theta
    out[p * p :, p * p :] = h_psi
    return out


# ---------------------------------------------------------------------------
# spectrum endpoint formulas
# ---------------------------------------------------------------------------

def eig_bounds(model: KsModel, k_trunc: int = 0) -> tuple[float, float]:
    """Spectrum endpoint formulas for the Hessian at the current model.

    k_trunc = 0 selects the exact Hessian: returns
    ``(min(p,q) * (lam_t_max + lam_p_max)^-2, (p+q) * (lam_t_min + lam_p_min)^-2)``,
    the endpoints of its nonzero spectrum. These are exact when both
    matrices have flat spectra and bound the spectrum from outside in
    general. k_trunc >= 1 selects the truncated Hessian and returns the
    min/max over the four per-block closed forms, which are exact
    eigenvalues of the truncated operator.
    """
    lam_t, lam_p = model.eig_theta.lam, model.eig_psi.lam
    p, q = model.p, model.q
    if k_trunc == 0:
        lam_min0 = min(p, q) * (lam_t[-1] + lam_p[-1]) ** -2
        lam_max = (p + q) * (lam_t[0] + lam_p[0]) ** -2
        return float(lam_min0), float(lam_max)
    k = k_trunc
    if not 1 <= k <= min(p, q):
        raise InputError(f"k_trunc out of range: {k}")
    theta_min = np.sum((lam_t[-1] + lam_p[:k]) ** -2.0) + (q - k) * (
        lam_t[-1] + lam_p[k - 1]
    ) ** -2.0
    theta_max = np.sum((lam_t[0] + lam_p[:k]) ** -2.0) + (q - k) * (
        lam_t[0] + lam_p[k - 1]
    ) ** -2.0
    psi_min = np.sum((lam_t[:k] + lam_p[-1]) ** -2.0) + (p - k) * (
        lam_t[k - 1] + lam_p[-1]
    ) ** -2.0
    psi_max = np.sum((lam_t[:k] + lam_p[0]) ** -2.0) + (p - k) * (
        lam_t[k - 1] + lam_p[0]
    ) ** -2.0
    return float(min(theta_min, psi_min)), float(max(theta_max, psi_max))
