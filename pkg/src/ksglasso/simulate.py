"""Ground-truth graph generators and the matrix-variate Gaussian sampler.

Random graphs follow the sign-pattern recipe: a sparse {-1, 0, +1} matrix A
gives theta = A A^T plus independent uniform diagonal boosts, with the
sparsity probability calibrated so the realized nonzero count lands near the
requested target. Sampling never forms the pq x pq covariance: a standard
normal q x p matrix is rescaled by the inverse square roots of the
eigenvalue pair sums and rotated back through the two eigenbases.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .core import KsModel, pair_sums
from .exceptions import GenerationError, InputError

NNZ_BAND = 0.30          # accepted relative deviation from target_nnz
MAX_DRAWS = 60           # attempts before declaring calibration failure
MAX_CONNECT_DRAWS = 500  # attempts to hit a connected block (cheap, small blocks)
DIAG_BOOST_FLOOR = 1e-4  # added to every diagonal on top of Unif(0, 0.1)


@dataclass(frozen=True)
class GraphSpec:
    """Recipe for one ground-truth graph."""

    kind: str                      # "random" | "clustered"
    size: int
    target_nnz: Optional[int] = None
    num_blocks: Optional[int] = None
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("random", "clustered"):
            raise InputError(f"unknown graph kind {self.kind!r}")
        if self.size < 1:
            raise InputError("size must be positive")
        if self.kind == "random":
            if self.target_nnz is None or not 1 <= self.target_nnz <= self.size**2:
                raise InputError("random graphs need 1 <= target_nnz <= size^2")
        if self.kind == "clustered":
            if self.num_blocks is None or not 1 <= self.num_blocks <= self.size:
                raise InputError("clustered graphs need 1 <= num_blocks <= size")


def _prob_nonzero_offdiag(p: int, s: float) -> float:
    """P([A A^T]_ij != 0) for i != j when A entries are nonzero w.p. s.

    The (i, j) entry is a sum over m ~ Binomial(p, s^2) overlapping columns
    of iid +-1 products; it vanishes iff the signed sum cancels.
    """
    ks = np.arange(p + 1)
    from scipy.stats import binom

    pmf = binom.pmf(ks, p, s * s)
    cancel = np.zeros(p + 1)
    even = ks[(ks % 2 == 0) & (ks > 0)]
    from scipy.special import comb

    cancel[even] = comb(even, even // 2) / 2.0**even
    return float(np.sum(pmf[1:] * (1.0 - cancel[1:])))


def _calibrate_sparsity(p: int, target_nnz: int) -> float:
    """Bisection on the nonzero probability of A for the requested fill."""
    target_off = max(target_nnz - p, 0)
    if target_off == 0 or p == 1:
        return 0.0
    goal = target_off / (p * (p - 1))
    lo, hi = 0.0, 1.0
    for _ in range(60):
        mid = (lo + hi) / 2
        if _prob_nonzero_offdiag(p, mid) < goal:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


def _draw_random_graph(p, target_nnz, rng):
    s = _calibrate_sparsity(p, target_nnz)
    a = rng.choice([-1.0, 0.0, 1.0], size=(p, p), p=[s / 2, 1 - s, s / 2])
    theta = a @ a.T
    theta[np.diag_indices(p)] += rng.uniform(0.0, 0.1, size=p) + DIAG_BOOST_FLOOR
    return theta


def gen_random_graph(spec: GraphSpec, rng: np.random.Generator) -> np.ndarray:
    """Sparse positive definite graph with about target_nnz nonzeros."""
    if spec.kind != "random":
        raise InputError("gen_random_graph requires kind='random'")
    p, target = spec.size, spec.target_nnz
    band = (target * (1 - NNZ_BAND), target * (1 + NNZ_BAND))
    for _ in range(MAX_DRAWS):
        theta = _draw_random_graph(p, target, rng)
        nnz = int(np.count_nonzero(theta))
        if band[0] <= nnz <= band[1] and np.linalg.eigvalsh(theta).min() > 0:
            return theta
    raise GenerationError(
        f"could not hit nnz target {target} (+-{NNZ_BAND:.0%}) in {MAX_DRAWS} draws"
    )


def _support_connected(block: np.ndarray) -> bool:
    adj = block != 0.0
    np.fill_diagonal(adj, False)
    n_comp, _ = connected_components(csr_matrix(adj), directed=False)
    return n_comp == 1


def gen_cluster_graph(spec: GraphSpec, rng: np.random.Generator) -> np.ndarray:
    """Block-diagonal graph; each block is one random graph.

    Blocks split the index range as evenly as possible. Each block targets
    about `size` nonzeros (capped by the block's capacity) and, whenever the
    target leaves room for a spanning tree, is redrawn until its support
    graph is connected, so the number of connected components equals
    num_blocks exactly.
    """
    if spec.kind != "clustered":
        raise InputError("gen_cluster_graph requires kind='clustered'")
    p, blocks = spec.size, spec.num_blocks
    sizes = [len(chunk) for chunk in np.array_split(np.arange(p), blocks)]
    theta = np.zeros((p, p))
    offset = 0
    for size in sizes:
        target = min(spec.target_nnz or p, size * size)
        # a spanning tree needs size - 1 edges = 2 (size - 1) off-diagonals
        connectable = target - size >= 2 * (size - 1)
        ok = False
        for _ in range(MAX_CONNECT_DRAWS):
            block = _draw_random_graph(size, target, rng)
            if size == 1 or not connectable or _support_connected(block):
                ok = True
                break
        if not ok:
            raise GenerationError(
                f"could not draw a connected {size}x{size} block "
                f"in {MAX_CONNECT_DRAWS} tries"
            )
        theta[offset : offset + size, offset : offset + size] = block
        offset += size
    if np.linalg.eigvalsh(theta).min() <= 0:
        raise GenerationError("clustered graph is not positive definite")
    return theta


def sample_data(model: KsModel, n: int, rng: np.random.Generator):
    """Draw n independent q x p matrices with precision theta (+) psi.

    Each draw rescales a standard normal by the inverse square roots of the
    eigenvalue pair sums and rotates through the two eigenbases, realizing
    the exact matrix-variate Gaussian without any pq x pq algebra.
    """
    if n < 1:
        raise InputError("need n >= 1 samples")
    sums = pair_sums(model.eig_theta, model.eig_psi)   # p x q
    if sums.min() <= 0:
        raise InputError("model is not positive definite")
    inv_sqrt = 1.0 / np.sqrt(sums.T)                   # q x p
    q_t, q_p = model.eig_theta.q_mat, model.eig_psi.q_mat
    out = []
    for _ in range(n):
        z = rng.standard_normal((model.q, model.p))
        out.append(q_p @ (z * inv_sqrt) @ q_t.T)
    return out
