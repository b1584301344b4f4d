"""Chunked seeding, thread invariance and the offset importance sampler."""
import math

import numpy as np
import pytest

from qhls.montecarlo import (
    CHUNK, MeanEstimate, MonteCarloConfig, OffsetSampler, chunk_rng, chunked_map, gaussian_block, partner_points,
    uniform_block, worker_count,
)
from qhls.quaternion import qdot


class TestStreams:
    def test_chunks_are_prefix_stable(self):
        a = gaussian_block(7, CHUNK + 10, (2, 4))
        b = gaussian_block(7, 2 * CHUNK, (2, 4))
        assert np.array_equal(a, b[: CHUNK + 10])

    def test_streams_differ(self):
        assert not np.array_equal(uniform_block(1, 100, 3, stream=0), uniform_block(1, 100, 3, stream=1))

    def test_seeds_differ(self):
        assert chunk_rng(1, 0).random() != chunk_rng(2, 0).random()

    def test_worker_env(self, monkeypatch):
        monkeypatch.setenv("QHLS_WORKERS", "3")
        assert worker_count() == 3
        monkeypatch.setenv("QHLS_WORKERS", "junk")
        assert worker_count() == 1

    def test_thread_count_does_not_change_results(self, monkeypatch):
        def f(start, size):
            return chunk_rng(5, start // CHUNK).random(size)

        monkeypatch.setenv("QHLS_WORKERS", "1")
        one = np.concatenate(chunked_map(f, 3 * CHUNK + 5))
        monkeypatch.setenv("QHLS_WORKERS", "4")
        four = np.concatenate(chunked_map(f, 3 * CHUNK + 5))
        assert np.array_equal(one, four)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            MonteCarloConfig(0)
        assert MonteCarloConfig().with_samples(10).sample_count == 10


class TestMeanEstimate:
    def test_standard_error(self):
        est = MeanEstimate.of(np.array([1.0, 2.0, 3.0, 4.0]))
        assert est.mean == 2.5 and math.isclose(est.std_error, np.std([1, 2, 3, 4], ddof=1) / 2)

    def test_single_value(self):
        assert MeanEstimate.of(np.array([1.0])).std_error == math.inf


class TestOffsetSampler:
    @pytest.mark.parametrize("n, lam", [(1, 4.0), (1, 8.0), (2, 12.0)])
    def test_weights_average_to_one(self, n, lam):
        s = OffsetSampler(n, lam)
        _, w, _ = s.sample(np.random.default_rng(0), 200000)
        est = MeanEstimate.of(w)
        assert abs(est.mean - 1) < 4 * est.std_error + 1e-3

    def test_uniform_density_normalized(self):
        # integrate over (a, phi) in [0,1] x [0,pi]
        from scipy import integrate

        s = OffsetSampler(2, 8.0)
        val, _ = integrate.dblquad(lambda phi, a: s.density_uniform(np.array(a), np.array(phi)), 0, 1, 0, math.pi)
        assert math.isclose(val, 1.0, rel_tol=1e-9)

    def test_moment_matches_uniform_pairs(self):
        # E[Re x] = 0 and E|x|^2 = 1/(n+1) for uniform pairs
        n = 1
        s = OffsetSampler(n, 6.0)
        x, w, _ = s.sample(np.random.default_rng(1), 400000)
        assert abs(np.mean(w * np.sum(x * x, axis=1)) - 1 / (n + 1)) < 0.01

    def test_partner_points(self):
        rng = np.random.default_rng(2)
        s = OffsetSampler(2, 8.0)
        zeta = rng.standard_normal((500, 3, 4))
        zeta /= np.linalg.norm(zeta.reshape(500, -1), axis=1)[:, None, None]
        x, _, _ = s.sample(rng, 500)
        eta = partner_points(zeta, x, rng.standard_normal(zeta.shape))
        assert np.allclose(np.sum(eta * eta, axis=(1, 2)), 1.0)
        assert np.allclose(qdot(zeta, eta), x, atol=1e-14)
