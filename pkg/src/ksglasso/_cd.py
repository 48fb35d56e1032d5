"""Numba kernel for the inner coordinate-descent direction solve.

One kernel serves both Hessian modes. Per block it receives a stack of
resolvent factors V_m with multiplicities w_m (all ones for the exact
Hessian; ones plus a tail weight on the last factor for the truncated one)
and, in exact mode, the squared inverse eigenvalue-sum grid that carries the
theta<->psi coupling. State kept incrementally per coordinate update:

  vd[m] = V_m @ D            (quadratic term, O(n) read / O(n) write)
  dq[l] = q_l^T D q_l        (Rayleigh quotients feeding the cross term)
  cr    = lam2-weighted contraction of the opposite block's dq

so a full sweep costs O(n_coords * (m_factors + cross) * n).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _soft_threshold(z, r):
    if z > r:
        return z - r
    if z < -r:
        return z + r
    return 0.0


@njit(cache=True)
def run_cd_sweeps(
    sides,
    iis,
    jjs,
    perms,
    # theta block
    g_th,
    th,
    v_th,
    w_th,
    a_off_th,
    a_diag_th,
    pen_th,
    # psi block
    g_ps,
    ps,
    v_ps,
    w_ps,
    a_off_ps,
    a_diag_ps,
    pen_ps,
    # cross coupling (exact mode only)
    use_cross,
    lam2,
    q_th,
    q_ps,
    # in/out state
    d_th,
    d_ps,
    vd_th,
    vd_ps,
):
    p = g_th.shape[0]
    q = g_ps.shape[0]
    m_th = v_th.shape[0]
    m_ps = v_ps.shape[0]

    dq_th = np.zeros(p)
    dq_ps = np.zeros(q)
    cr_th = np.zeros(p)   # rows: lam2 @ dq_ps
    cr_ps = np.zeros(q)   # cols: lam2.T @ dq_th

    n_coords = sides.shape[0]
    for s in range(perms.shape[0]):
        for t in range(n_coords):
            idx = perms[s, t]
            i = iis[idx]
            j = jjs[idx]
            if sides[idx] == 0:
                quad = 0.0
                for m in range(m_th):
                    acc = 0.0
                    for r in range(p):
                        acc += vd_th[m, i, r] * v_th[m, j, r]
                    quad += w_th[m] * acc
                b = g_th[i, j] + quad
                if use_cross:
                    acc = 0.0
                    for l in range(p):
                        acc += q_th[i, l] * q_th[j, l] * cr_th[l]
                    b += acc
                if i == j:
                    a = a_diag_th[i]
                    if a <= 0.0:
                        return 1
                    mu = -b / a
                else:
                    a = a_off_th[i, j]
                    if a <= 0.0:
                        return 1
                    c = th[i, j] + d_th[i, j]
                    mu = -c + _soft_threshold(c - b / a, pen_th / a)
                if mu != 0.0:
                    d_th[i, j] += mu
                    for m in range(m_th):
                        for r in range(p):
                            vd_th[m, r, i] += mu * v_th[m, j, r]
                    if i != j:
                        d_th[j, i] += mu
                        for m in range(m_th):
                            for r in range(p):
                                vd_th[m, r, j] += mu * v_th[m, i, r]
                    if use_cross:
                        fac = mu if i == j else 2.0 * mu
                        for k in range(q):
                            acc = 0.0
                            for l in range(p):
                                acc += lam2[l, k] * q_th[i, l] * q_th[j, l]
                            cr_ps[k] += fac * acc
                        for l in range(p):
                            dq_th[l] += fac * q_th[i, l] * q_th[j, l]
            else:
                quad = 0.0
                for m in range(m_ps):
                    acc = 0.0
                    for r in range(q):
                        acc += vd_ps[m, i, r] * v_ps[m, j, r]
                    quad += w_ps[m] * acc
                b = g_ps[i, j] + quad
                if use_cross:
                    acc = 0.0
                    for k in range(q):
                        acc += q_ps[i, k] * q_ps[j, k] * cr_ps[k]
                    b += acc
                if i == j:
                    a = a_diag_ps[i]
                    if a <= 0.0:
                        return 1
                    mu = -b / a
                else:
                    a = a_off_ps[i, j]
                    if a <= 0.0:
                        return 1
                    c = ps[i, j] + d_ps[i, j]
                    mu = -c + _soft_threshold(c - b / a, pen_ps / a)
                if mu != 0.0:
                    d_ps[i, j] += mu
                    for m in range(m_ps):
                        for r in range(q):
                            vd_ps[m, r, i] += mu * v_ps[m, j, r]
                    if i != j:
                        d_ps[j, i] += mu
                        for m in range(m_ps):
                            for r in range(q):
                                vd_ps[m, r, j] += mu * v_ps[m, i, r]
                    if use_cross:
                        fac = mu if i == j else 2.0 * mu
                        for l in range(p):
                            acc = 0.0
                            for k in range(q):
                                acc += lam2[l, k] * q_ps[i, k] * q_ps[j, k]
                            cr_th[l] += fac * acc
                        for k in range(q):
                            dq_ps[k] += fac * q_ps[i, k] * q_ps[j, k]
    return 0
