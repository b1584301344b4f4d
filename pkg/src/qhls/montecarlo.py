"""Deterministic random streams and importance sampling of sphere pairs.

Streams are cut into fixed-size chunks, each with its own child seed
``SeedSequence(seed, spawn_key=(chunk,))``, so the numbers drawn never depend
on how many workers process the chunks.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

CHUNK = 8192
DEFAULT_SEED = 42


@dataclass(frozen=True)
class MonteCarloConfig:
    """Sample budget, seed and target tolerance of a Monte Carlo estimate."""

    sample_count: int = 200_000
    seed: int = DEFAULT_SEED
    tolerance: float = 1e-3

    def __post_init__(self):
        if self.sample_count < 1:
            raise ValueError("sample_count must be >= 1")

    def with_samples(self, count: int) -> "MonteCarloConfig":
        return MonteCarloConfig(int(count), self.seed, self.tolerance)


def worker_count() -> int:
    """Worker threads, from ``QHLS_WORKERS`` (default 1)."""
    raw = os.environ.get("QHLS_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def chunk_rng(seed: int, chunk: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(chunk))))


def _chunks(count: int) -> list[tuple[int, int]]:
    return [(c, min(CHUNK, count - c * CHUNK)) for c in range((count + CHUNK - 1) // CHUNK)]


def gaussian_block(seed: int, count: int, shape: tuple, stream: int = 0) -> np.ndarray:
    """``count`` standard normal arrays of ``shape``, reproducible chunk by chunk."""
    parts = [chunk_rng(seed, c, stream).standard_normal((size,) + tuple(shape)) for c, size in _chunks(count)]
    return np.concatenate(parts, axis=0)


def uniform_block(seed: int, count: int, width: int, stream: int = 0) -> np.ndarray:
    parts = [chunk_rng(seed, c, stream).random((size, width)) for c, size in _chunks(count)]
    return np.concatenate(parts, axis=0)


def chunked_map(func, count: int):
    """Apply ``func(start, size)`` over the chunk layout and return results in
    chunk order (threads from :func:`worker_count`)."""
    spans = [(c * CHUNK, size) for c, size in _chunks(count)]
    workers = worker_count()
    if workers == 1 or len(spans) == 1:
        return [func(s, n) for s, n in spans]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda sn: func(*sn), spans))


@dataclass(frozen=True)
class MeanEstimate:
    """Sample mean with its standard error."""

    mean: float
    std_error: float
    count: int

    @classmethod
    def of(cls, values: np.ndarray) -> "MeanEstimate":
        v = np.asarray(values, dtype=float)
        n = v.size
        se = float(np.std(v, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
        return cls(float(np.mean(v)), se, n)


# -- offset sampling -----------------------------------------------------------


@dataclass(frozen=True)
class OffsetSampler:
    """Draws ``x = zeta . conj(eta)`` from a defensive mixture on the unit ball of ``H``.

    Under the uniform measure on pairs, ``x = t (cos phi + sin phi omega)`` has
    density ``p ~ (1-t^2)^{2n-1} t^3 sin^2 phi`` in ``(t, phi)`` with ``omega``
    uniform on ``S^2``.  Near ``x = 1`` the HLS kernel ``|1-x|^{-lambda/2}``
    makes the plain estimator's variance infinite once ``lambda >= Q/2``.  The
    mixture adds a component ``~ r^kappa`` in polar coordinates
    ``(a, phi) = (1-t, phi) = (r cos psi, r sin psi)``, ``r <= 1``; the weight
    ``p/q`` then has a finite second moment whenever
    ``-1 < kappa < 4n + 5 - lambda``.
    """

    n: int
    lam: float
    near_weight: float = 0.5

    @property
    def kappa(self) -> float:
        return 0.5 * (4 * self.n + 4 - self.lam)

    @property
    def z_uniform(self) -> float:
        return math.pi / (8 * self.n * (2 * self.n + 1))

    def density_uniform(self, a: np.ndarray, phi: np.ndarray) -> np.ndarray:
        """Uniform-measure density of ``(a, phi)`` (``omega`` excluded)."""
        return (a * (2.0 - a)) ** (2 * self.n - 1) * (1.0 - a) ** 3 * np.sin(phi) ** 2 / self.z_uniform

    def density_near(self, a: np.ndarray, phi: np.ndarray) -> np.ndarray:
        r = np.hypot(a, phi)
        inside = r <= 1.0
        rr = np.where(inside, r, 1.0)
        return np.where(inside, (self.kappa + 1.0) * (2.0 / math.pi) * rr ** (self.kappa - 1.0), 0.0)

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns ``(x, weight, t)`` where ``weight = p/q`` and ``x`` has shape ``(size, 4)``."""
        a, phi = self._sample_uniform(rng, size)
        use_near = rng.random(size) < self.near_weight
        m = int(use_near.sum())
        if m:
            u = rng.random((m, 2))
            r = u[:, 0] ** (1.0 / (self.kappa + 1.0))
            psi = 0.5 * math.pi * u[:, 1]
            a[use_near] = r * np.cos(psi)
            phi[use_near] = r * np.sin(psi)
        p = self.density_uniform(a, phi)
        q = self.near_weight * self.density_near(a, phi) + (1.0 - self.near_weight) * p
        omega = rng.standard_normal((size, 3))
        omega /= np.linalg.norm(omega, axis=1, keepdims=True)
        t = 1.0 - a
        x = np.empty((size, 4))
        x[:, 0] = t * np.cos(phi)
        x[:, 1:] = (t * np.sin(phi))[:, None] * omega
        return x, p / q, t

    def _sample_uniform(self, rng: np.random.Generator, size: int):
        # t^2 ~ Beta(2, 2n), phi by rejection from sin^2
        s = rng.beta(2.0, 2.0 * self.n, size)
        a = 1.0 - np.sqrt(s)
        phi = np.empty(size)
        todo = np.arange(size)
        while todo.size:
            cand = rng.random(todo.size) * math.pi
            ok = rng.random(todo.size) < np.sin(cand) ** 2
            phi[todo[ok]] = cand[ok]
            todo = todo[~ok]
        return a, phi


def partner_points(zeta: np.ndarray, x: np.ndarray, gauss: np.ndarray) -> np.ndarray:
    """``eta = conj(x) zeta + sqrt(1-|x|^2) v`` with ``v`` the unit projection of
    ``gauss`` onto ``{v : v . conj(zeta) = 0}``; then ``zeta . conj(eta) = x``."""
    from .quaternion import qconj, qdot, qmul

    proj = gauss - qmul(qdot(gauss, zeta)[..., None, :], zeta)
    nv = np.sqrt(np.sum(proj * proj, axis=(-2, -1)))
    v = proj / nv[..., None, None]
    head = qmul(qconj(x)[..., None, :], zeta)
    return head + np.sqrt(np.clip(1.0 - np.sum(x * x, axis=-1), 0.0, None))[..., None, None] * v
