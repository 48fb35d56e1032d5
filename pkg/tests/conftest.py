"""Shared fixtures and instance builders for the test suite."""

import numpy as np
import pytest

from ksglasso.core import KsModel, sample_stats, symmetrize


def random_sym(n, rng, scale=1.0):
    a = rng.standard_normal((n, n)) * scale
    return symmetrize(a)


def random_model(p, q, rng, min_pair_sum=0.5):
    """Random (theta, psi) whose Kronecker sum is safely positive definite.

    The individual matrices are generally indefinite, which exercises the
    gauge freedom: only the eigenvalue-sum grid must be positive.
    """
    theta = random_sym(p, rng)
    psi = random_sym(q, rng)
    lo = np.linalg.eigvalsh(theta).min() + np.linalg.eigvalsh(psi).min()
    shift = (min_pair_sum - lo) / 2.0
    theta = theta + shift * np.eye(p)
    psi = psi + shift * np.eye(q)
    return KsModel.create(theta, psi)


def random_stats(p, q, rng, n=3):
    data = [rng.standard_normal((q, p)) for _ in range(n)]
    return sample_stats(data)


def random_instance(p, q, rng, n=3):
    return random_stats(p, q, rng, n=n), random_model(p, q, rng)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
