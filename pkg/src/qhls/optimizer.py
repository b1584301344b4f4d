"""Euler-Lagrange fixed-point search for HLS extremals among zonal functions.

A zonal function depends on ``zeta`` only through ``zeta_{n+1} = cos(theta) u``
with ``Re u = cos(phi)``; it lives on a tensor Gauss grid in ``(theta, phi)``.
The kernel operator acts diagonally on the zonal harmonics ``Z_{j,k}``
(Funk-Hecke), so it is applied by projecting onto a truncated ``Z_{j,k}`` basis
and scaling by the eigenvalues.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_legendre

from .group import GroupParams
from .spectral import EigenIndex, eig_k1_closed, eig_quadrature, hls_exponent, kernel_k1, zonal_value

log = logging.getLogger(__name__)

DIVERGENCE_STREAK = 10


class OptimizerDivergence(RuntimeError):
    """Quotient decreased for too many consecutive steps."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


@dataclass
class ZonalGrid:
    """Gauss grid on ``[0, pi/2] x [0, pi]`` with weights of the reduced surface
    measure ``|S^{4n-1}| sin^{4n-1}(theta) cos^3(theta) * 4 pi sin^2(phi)``."""

    params: GroupParams
    theta_nodes: np.ndarray
    phi_nodes: np.ndarray
    measure_weights: np.ndarray
    basis_index: list[EigenIndex]
    basis: np.ndarray
    gram_factor: tuple = field(repr=False, default=None)

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta_nodes.size, self.phi_nodes.size

    @property
    def cos_theta(self) -> np.ndarray:
        return np.cos(self.theta_nodes)[:, None] * np.ones(self.phi_nodes.size)[None, :]

    @property
    def phi(self) -> np.ndarray:
        return np.ones(self.theta_nodes.size)[:, None] * self.phi_nodes[None, :]

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.measure_weights * values))

    def last_slot(self) -> np.ndarray:
        """The quaternion ``zeta_{n+1} = cos(theta)(cos phi, sin phi, 0, 0)`` at every node."""
        t, p = self.cos_theta, self.phi
        out = np.zeros(t.shape + (4,))
        out[..., 0] = t * np.cos(p)
        out[..., 1] = t * np.sin(p)
        return out

    def from_sphere_function(self, f) -> "ZonalFunction":
        """Sample a zonal sphere function at representative points of the nodes."""
        from .sphere import SpherePoint

        n = self.params.n
        last = self.last_slot().reshape(-1, 4)
        z = np.zeros((last.shape[0], n + 1, 4))
        z[:, -1, :] = last
        rest = np.sqrt(np.clip(1.0 - np.sum(last * last, axis=1), 0.0, None))
        z[:, 0, 0] = rest
        vals = np.asarray(f(SpherePoint(z)), dtype=float).reshape(self.shape)
        return ZonalFunction(vals)


@dataclass
class ZonalFunction:
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)


def _basis_lattice(resolution: int) -> list[EigenIndex]:
    mmax, kmax = resolution // 2, resolution // 4
    return [EigenIndex(m + k, k) for m in range(mmax) for k in range(kmax)]


def build_grid(params: GroupParams, resolution: int = 64) -> ZonalGrid:
    """Tensor Gauss-Legendre grid with ``resolution`` nodes per axis and a zonal
    harmonic basis with ``j - k < resolution/2``, ``k < resolution/4``."""
    if resolution < 8:
        raise ValueError("resolution must be >= 8")
    n = params.n
    x, w = roots_legendre(resolution)
    th = 0.25 * math.pi * (x + 1.0)
    wth = 0.25 * math.pi * w
    ph = 0.5 * math.pi * (x + 1.0)
    wph = 0.5 * math.pi * w
    s4n1 = 2 * math.pi ** (2 * n) / math.factorial(2 * n - 1)
    wt = s4n1 * np.sin(th) ** (4 * n - 1) * np.cos(th) ** 3 * wth
    wp = 4 * math.pi * np.sin(ph) ** 2 * wph
    weights = wt[:, None] * wp[None, :]
    idx = _basis_lattice(resolution)
    T = np.cos(th)[:, None] * np.ones(resolution)[None, :]
    P = np.ones(resolution)[:, None] * ph[None, :]
    cols = []
    for e in idx:
        z = zonal_value(e, params, T, P).ravel()
        cols.append(z / math.sqrt(float(np.sum(weights.ravel() * z * z))))
    B = np.stack(cols, axis=1)
    G = B.T @ (weights.ravel()[:, None] * B)
    grid = ZonalGrid(params, th, ph, weights, idx, B)
    grid.gram_factor = np.linalg.cholesky(G)
    return grid


@lru_cache(maxsize=16)
def _eigs(n: int, lam: float, indices: tuple, spectrum: str) -> np.ndarray:
    params = GroupParams(n)
    alpha = lam / 4
    if spectrum == "closed":
        vals = [eig_k1_closed(alpha, e, params) for e in indices]
    elif spectrum == "quadrature":
        kern = kernel_k1(alpha)
        vals = [eig_quadrature(kern, e, params, tol=1e-9) for e in indices]
    else:
        raise ValueError(f"unknown spectrum source {spectrum!r}")
    return 2 ** (lam / 2) * np.array(vals)


def project(grid: ZonalGrid, f: ZonalFunction) -> np.ndarray:
    """Weighted least-squares coefficients of ``f`` in the normalized zonal basis."""
    rhs = grid.basis.T @ (grid.measure_weights.ravel() * f.values.ravel())
    L = grid.gram_factor
    return np.linalg.solve(L.T, np.linalg.solve(L, rhs))


def apply_kernel(grid: ZonalGrid, f: ZonalFunction, lam: float, spectrum: str = "closed") -> ZonalFunction:
    """``(K f)(zeta) = int f(eta) d_S^{-lambda}(zeta, eta) deta`` at every node, with
    ``d_S^{-lambda} = 2^{lambda/2} |1 - zeta . conj(eta)|^{-lambda/2}``."""
    eig = _eigs(grid.params.n, float(lam), tuple(grid.basis_index), spectrum)
    coef = project(grid, f)
    return ZonalFunction((grid.basis @ (eig * coef)).reshape(grid.shape))


def lp_norm(grid: ZonalGrid, f: ZonalFunction, p: float) -> float:
    return grid.integrate(np.abs(f.values) ** p) ** (1.0 / p)


def quotient(grid: ZonalGrid, f: ZonalFunction, lam: float, params: GroupParams | None = None,
             spectrum: str = "closed") -> float:
    """``I(f, f) / |f|_p^2`` on the grid."""
    params = params or grid.params
    p = hls_exponent(lam, params)
    kf = apply_kernel(grid, f, lam, spectrum)
    return grid.integrate(f.values * kf.values) / lp_norm(grid, f, p) ** 2


@dataclass
class OptimizerRun:
    f: ZonalFunction
    trace: list[float]
    iterations: int
    converged: bool
    decreases: int

    def report(self, lam: float, n: int, resolution: int, reference: float) -> dict:
        final = self.trace[-1]
        return {
            "lambda": lam,
            "n": n,
            "resolution": resolution,
            "iterations": self.iterations,
            "final_quotient": final,
            "reference_constant": reference,
            "rel_gap": (final - reference) / reference,
            "trace": list(self.trace),
        }


def el_iterate(grid: ZonalGrid, f0: ZonalFunction, lam: float, params: GroupParams | None = None,
               max_iter: int = 200, tol: float = 1e-12, spectrum: str = "closed") -> OptimizerRun:
    """Iterate ``f <- (K f)^{1/(p-1)}`` with ``|f|_p = 1`` after each step."""
    params = params or grid.params
    if max_iter < 1:
        raise ValueError("max_iter must be >= 1")
    if np.any(f0.values <= 0):
        raise ValueError("initial function must be positive")
    p = hls_exponent(lam, params)
    f = ZonalFunction(f0.values / lp_norm(grid, f0, p))
    trace = [quotient(grid, f, lam, params, spectrum)]
    floor = 1e-300
    streak = 0
    decreases = 0
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        kf = apply_kernel(grid, f, lam, spectrum)
        vals = np.maximum(kf.values, floor) ** (1.0 / (p - 1.0))
        f = ZonalFunction(vals / lp_norm(grid, ZonalFunction(vals), p))
        trace.append(quotient(grid, f, lam, params, spectrum))
        delta = trace[-1] - trace[-2]
        if delta < -1e-9 * abs(trace[-2]):
            decreases += 1
            streak += 1
            log.info("quotient decreased by %.3g at step %d", -delta, it)
            if streak >= DIVERGENCE_STREAK:
                raise OptimizerDivergence("quotient decreased for 10 consecutive steps", trace)
        else:
            streak = 0
        if abs(delta) < tol * abs(trace[-1]):
            converged = True
            break
    return OptimizerRun(f, trace, it, converged, decreases)


def random_zonal_start(grid: ZonalGrid, rng: np.random.Generator, amplitude: float = 0.3,
                       jmax: int = 4) -> ZonalFunction:
    """``1 + amplitude * g`` with ``g`` a random combination of low zonal harmonics scaled to ``max |g| = 1``."""
    g = np.zeros(grid.shape)
    t, p = grid.cos_theta, grid.phi
    for j in range(1, jmax + 1):
        for k in range(j + 1):
            g += rng.standard_normal() * zonal_value(EigenIndex(j, k), grid.params, t, p)
    g /= np.max(np.abs(g))
    return ZonalFunction(1.0 + amplitude * g)
