"""Generators and the matrix-variate sampler."""

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ksglasso.core import KsModel, collapse_psi, collapse_theta, kron_sum_dense, sample_stats
from ksglasso.exceptions import InputError
from ksglasso.simulate import (
    GraphSpec,
    gen_cluster_graph,
    gen_random_graph,
    sample_data,
)
from ksglasso.solver import SolverConfig, partition_fixed_mask, screen_blocks

from conftest import random_model


def n_components(mat):
    adj = mat != 0.0
    np.fill_diagonal(adj, False)
    count, _ = connected_components(csr_matrix(adj), directed=False)
    return count


class TestRandomGraph:
    def test_diagonal_limit(self):
        rng = np.random.default_rng(0)
        theta = gen_random_graph(GraphSpec("random", 30, target_nnz=30), rng)
        assert_allclose(theta, np.diag(np.diag(theta)))
        assert np.linalg.eigvalsh(theta).min() > 0

    def test_nnz_band_at_paper_scale(self):
        rng = np.random.default_rng(1)
        theta = gen_random_graph(GraphSpec("random", 100, target_nnz=1000), rng)
        nnz = np.count_nonzero(theta)
        assert 700 <= nnz <= 1300
        assert np.linalg.eigvalsh(theta).min() > 0

    def test_deterministic_given_seed(self):
        spec = GraphSpec("random", 40, target_nnz=240)
        a = gen_random_graph(spec, np.random.default_rng(9))
        b = gen_random_graph(spec, np.random.default_rng(9))
        assert np.array_equal(a, b)

    def test_all_draws_positive_definite(self):
        spec = GraphSpec("random", 25, target_nnz=150)
        for seed in range(100):
            theta = gen_random_graph(spec, np.random.default_rng(seed))
            assert np.linalg.eigvalsh(theta).min() > 0

    def test_spec_validation(self):
        with pytest.raises(InputError):
            GraphSpec("random", 10, target_nnz=101)
        with pytest.raises(InputError):
            GraphSpec("weird", 10, target_nnz=10)


class TestClusterGraph:
    def test_all_singleton_blocks(self):
        rng = np.random.default_rng(2)
        theta = gen_cluster_graph(
            GraphSpec("clustered", 12, target_nnz=12, num_blocks=12), rng
        )
        assert_allclose(theta, np.diag(np.diag(theta)))

    def test_five_blocks_five_components(self):
        rng = np.random.default_rng(3)
        theta = gen_cluster_graph(
            GraphSpec("clustered", 100, target_nnz=100, num_blocks=5), rng
        )
        assert n_components(theta) == 5
        assert np.linalg.eigvalsh(theta).min() > 0

    def test_screening_recovers_components(self):
        # exact covariance of the truth thresholded at a suitable level can
        # only merge true components, never split them
        rng = np.random.default_rng(4)
        theta = gen_cluster_graph(
            GraphSpec("clustered", 30, target_nnz=90, num_blocks=3), rng
        )
        psi = gen_cluster_graph(
            GraphSpec("clustered", 20, target_nnz=60, num_blocks=2), rng
        )
        truth = KsModel.create(theta, psi)
        # population statistics implied by the truth
        w = np.linalg.inv(kron_sum_dense(theta, psi))
        from ksglasso.core import SampleStats

        stats = SampleStats(
            collapse_theta(w, 30, 20) / 20, collapse_psi(w, 30, 20) / 30, 1, 30, 20
        )
        cfg = SolverConfig(gamma_theta=1e-4, gamma_psi=1e-4)
        part_theta, _ = screen_blocks(stats, cfg)
        true_labels = connected_components(
            csr_matrix(theta != 0), directed=False
        )[1]
        mask = partition_fixed_mask(part_theta, 30)
        # no estimated component splits a true one
        for c in np.unique(true_labels):
            members = np.nonzero(true_labels == c)[0]
            assert not mask[np.ix_(members, members)].any()


class TestSampleData:
    def test_identity_model_unit_variance(self):
        model = KsModel.create(np.eye(3), np.eye(4))
        rng = np.random.default_rng(5)
        ys = sample_data(model, 4000, rng)
        pooled = np.concatenate([y.reshape(-1) for y in ys])
        assert pooled.var() == pytest.approx(0.5, rel=0.05)
        assert abs(pooled.mean()) < 0.02

    def test_covariance_matches_dense_inverse(self, rng):
        model = random_model(4, 4, rng, min_pair_sum=1.0)
        ys = sample_data(model, 20000, rng)
        vecs = np.stack([y.reshape(-1, order="F") for y in ys])
        emp = vecs.T @ vecs / len(ys)
        w = np.linalg.inv(kron_sum_dense(model.theta, model.psi))
        assert np.abs(emp - w).max() <= 5e-2

    def test_reproducible(self, rng):
        model = random_model(3, 3, rng)
        a = sample_data(model, 3, np.random.default_rng(77))
        b = sample_data(model, 3, np.random.default_rng(77))
        assert all(np.array_equal(x, y) for x, y in zip(a, b))

    def test_monte_carlo_rate(self, rng):
        # quadrupling the sample size should roughly halve the error
        model = random_model(4, 4, rng, min_pair_sum=1.0)
        w = np.linalg.inv(kron_sum_dense(model.theta, model.psi))

        def mc_error(n, seed):
            ys = sample_data(model, n, np.random.default_rng(seed))
            vecs = np.stack([y.reshape(-1, order="F") for y in ys])
            emp = vecs.T @ vecs / n
            return np.abs(emp - w).mean()

        err_small = mc_error(20000, 123)
        err_big = mc_error(80000, 123)
        assert err_big <= 0.55 * err_small

    def test_stats_converge_to_collapsed_inverse(self, rng):
        model = random_model(3, 4, rng, min_pair_sum=1.0)
        stats = sample_stats(sample_data(model, 40000, rng))
        w = np.linalg.inv(kron_sum_dense(model.theta, model.psi))
        assert np.abs(stats.q * stats.s_mat - collapse_theta(w, 3, 4)).max() <= 2e-2
        assert np.abs(stats.p * stats.t_mat - collapse_psi(w, 3, 4)).max() <= 2e-2
