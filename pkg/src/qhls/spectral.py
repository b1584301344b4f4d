"""Funk-Hecke eigenvalues of zonal kernel operators on the quaternionic sphere.

Kernels are functions of ``q = zeta . conj(eta)`` through ``t = |q|`` and
``x = Re q / |q|``; closed forms are checked against an adaptive 2D quadrature
of the reduced Funk-Hecke integral.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import poch, roots_jacobi, roots_legendre

from .group import GroupParams
from .special import JacobiParams, gamma_ratio, jacobi_p, rising


class SpectralDomainError(ValueError):
    """Parameter outside the admissible range of an eigenvalue formula."""


class QuadratureError(RuntimeError):
    """Adaptive quadrature ran out of its subdivision budget."""


@dataclass(frozen=True, order=True)
class EigenIndex:
    """Label ``(j, k)`` of the bispherical harmonic space ``V_{j,k}``, ``j >= k >= 0``."""

    j: int
    k: int

    def __post_init__(self):
        if not (int(self.j) == self.j and int(self.k) == self.k and self.j >= self.k >= 0):
            raise SpectralDomainError(f"need integers j >= k >= 0, got ({self.j}, {self.k})")

    @property
    def m(self) -> int:
        return self.j - self.k


def lattice(jmax: int, jmin: int = 0) -> list[EigenIndex]:
    """All ``(j, k)`` with ``jmin <= j <= jmax``, sorted."""
    return [EigenIndex(j, k) for j in range(jmin, jmax + 1) for k in range(j + 1)]


def as_fraction(alpha) -> Fraction:
    """Exact rational from an int, Fraction, ``"p/q"`` string or short decimal float."""
    if isinstance(alpha, Fraction):
        return alpha
    if isinstance(alpha, str):
        return Fraction(alpha.strip())
    return Fraction(alpha).limit_denominator(10**6)


@dataclass(frozen=True)
class AbcTriple:
    """``(a, b, c) = (j+alpha, k+alpha-1, j+k+Q/2-1)`` in exact arithmetic."""

    a: Fraction
    b: Fraction
    c: Fraction

    @classmethod
    def build(cls, alpha, idx: EigenIndex, params: GroupParams) -> "AbcTriple":
        al = as_fraction(alpha)
        half_q = Fraction(params.Q, 2)
        return cls(idx.j + al, idx.k + al - 1, idx.j + idx.k + half_q - 1)

    @property
    def excess(self) -> Fraction:
        """``c - a - b``, equal to ``Q/2 - 2 alpha``."""
        return self.c - self.a - self.b


# -- zonal harmonics ----------------------------------------------------------


def chebyshev_u_ratio(m: int, phi):
    """``sin((m+1) phi) / sin(phi)`` with the removable limits at ``0`` and ``pi``."""
    phi = np.asarray(phi, dtype=float)
    x = np.cos(phi)
    u_prev, u = np.zeros_like(x), np.ones_like(x)
    for _ in range(m):
        u_prev, u = u, 2.0 * x * u - u_prev
    return u


def zonal_value(idx: EigenIndex, params: GroupParams, cos_theta, phi):
    """Zonal harmonic of ``V_{j,k}`` normalized to 1 at ``q = 1``:

    ``U_{j-k}(cos phi) cos^{j-k}(theta) P_k^{(2n-1, j-k+1)}(cos 2theta)``
    divided by its value ``(j-k+1) P_k(1)`` at ``theta = phi = 0``.
    """
    t = np.asarray(cos_theta, dtype=float)
    jp = JacobiParams(idx.k, 2 * params.n - 1, idx.m + 1)
    raw = chebyshev_u_ratio(idx.m, phi) * t**idx.m * jacobi_p(jp, 2.0 * t * t - 1.0)
    return raw / ((idx.m + 1) * jp.value_at_one())


def zonal_on_sphere(idx: EigenIndex, zeta: np.ndarray) -> np.ndarray:
    """Evaluate the normalized zonal harmonic at ``q = zeta_{n+1}`` (pole ``e_{n+1}``)."""
    last = zeta[..., -1, :]
    t = np.sqrt(np.sum(last * last, axis=-1))
    safe = np.where(t > 0, t, 1.0)
    x = np.clip(last[..., 0] / safe, -1.0, 1.0)
    params = GroupParams(zeta.shape[-2] - 1)
    return zonal_value(idx, params, np.minimum(t, 1.0), np.arccos(x))


# -- kernels ------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedKernel:
    """A kernel ``K(q)`` depending on ``t = |q|`` and ``x = Re q/|q|`` only.

    ``func(t, x, d)`` receives ``d = |1-q|^2 = 1 + t^2 - 2tx`` precomputed
    without cancellation.  ``singular_order`` is the exponent ``s`` in
    ``K ~ d^{-s}`` at ``q = 1`` (0 for bounded kernels); the quadrature uses it
    to choose a Gauss-Jacobi rule at the singular corner.
    """

    func: Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
    singular_order: float = 0.0
    label: str = "kernel"


def kernel_k1(alpha: float) -> ReducedKernel:
    """``K_1^alpha(q) = |1-q|^{-2 alpha}``."""
    a = float(alpha)
    return ReducedKernel(lambda t, x, d: d ** (-a), max(a, 0.0), f"K1^{a}")


def kernel_k2(alpha: float) -> ReducedKernel:
    """``K_2^alpha(q) = |q|^2 |1-q|^{-2 alpha}``."""
    a = float(alpha)
    return ReducedKernel(lambda t, x, d: t * t * d ** (-a), max(a, 0.0), f"K2^{a}")


def kernel_const(value: float = 1.0) -> ReducedKernel:
    return ReducedKernel(lambda t, x, d: np.full_like(t, value), 0.0, "const")


# -- adaptive Funk-Hecke quadrature --------------------------------------------


def funk_hecke_prefactor(idx: EigenIndex, params: GroupParams) -> float:
    """``2 pi^{2n} k! / ((j-k+1) (k+2n-1)!)``."""
    n = params.n
    return 2.0 * math.pi ** (2 * n) * math.factorial(idx.k) / ((idx.m + 1) * math.factorial(idx.k + 2 * n - 1))


@lru_cache(maxsize=64)
def _legendre01(order: int):
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def _jacobi01(order: int, beta: float):
    # nodes/weights for int_0^1 s^beta f(s) ds
    x, w = roots_jacobi(order, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)


@dataclass
class _Sector:
    psi_lo: float
    psi_hi: float
    radius: Callable[[np.ndarray], np.ndarray]


_PSI_SPLIT = math.atan(math.pi)
_SECTORS = (
    _Sector(0.0, _PSI_SPLIT, lambda psi: 1.0 / np.cos(psi)),
    _Sector(_PSI_SPLIT, math.pi / 2, lambda psi: math.pi / np.sin(psi)),
)


@dataclass
class QuadratureResult:
    value: float
    error: float
    cells: int
    evaluations: int = field(default=0)


class _Integrand:
    """Funk-Hecke integrand in polar coordinates about the singular corner.

    With ``a = 1 - cos(theta)`` and ``(a, phi) = (r cos psi, r sin psi)`` the
    corner ``a = phi = 0`` becomes ``r = 0``, ``d = r^2 g(r, psi)`` with ``g``
    smooth and positive, and the whole integrand is ``r^beta`` times a smooth
    function, ``beta = 2n + 2 - 2s``.
    """

    def __init__(self, kernel: ReducedKernel, idx: EigenIndex, params: GroupParams):
        self.kernel = kernel
        self.idx = idx
        self.n = params.n
        self.jac = JacobiParams(idx.k, 2 * params.n - 1, idx.m + 1)
        self.beta = 2 * params.n + 2 - 2 * kernel.singular_order
        if self.beta <= -1:
            raise SpectralDomainError("kernel singularity is not integrable (need singular_order < Q/4)")

    def __call__(self, rho, psi, radius, with_weight: bool):
        r = rho * radius
        a = r * np.cos(psi)
        phi = r * np.sin(psi)
        t = 1.0 - a
        x = np.cos(phi)
        d = a * a + 4.0 * t * np.sin(0.5 * phi) ** 2
        m = self.idx.m
        vals = (
            (a * (2.0 - a)) ** (2 * self.n - 1)
            * t ** (m + 3)
            * jacobi_p(self.jac, np.clip(2.0 * t * t - 1.0, -1.0, 1.0))
            * 4.0
            * math.pi
            * self.kernel.func(t, x, d)
            * np.sin((m + 1) * phi)
            * np.sin(phi)
            * radius
            * radius
            * rho
        )
        if not with_weight:
            vals = vals / rho**self.beta
        return vals


def _cell_rule(f: _Integrand, sector: _Sector, cell, order: int) -> float:
    r0, r1, p0, p1 = cell
    ps, pw = _legendre01(order)
    psi = p0 + (p1 - p0) * ps
    wpsi = (p1 - p0) * pw
    radius = sector.radius(psi)
    if r0 == 0.0:
        rs, rw = _jacobi01(order, float(f.beta))
        rho = r1 * rs
        wrho = rw * r1 ** (f.beta + 1.0)
        vals = f(rho[:, None], psi[None, :], radius[None, :], with_weight=False)
    else:
        rho = r0 + (r1 - r0) * ps
        wrho = (r1 - r0) * pw
        vals = f(rho[:, None], psi[None, :], radius[None, :], with_weight=True)
    return float(wrho @ vals @ wpsi)


def eig_quadrature(
    kernel: ReducedKernel,
    idx: EigenIndex,
    params: GroupParams,
    tol: float = 1e-11,
    atol: float = 1e-13,
    max_cells: int = 4000,
    orders: tuple[int, int] = (10, 16),
    detail: bool = False,
):
    """Eigenvalue of the kernel operator on ``V_{j,k}`` by the reduced Funk-Hecke
    formula, integrated adaptively on ``theta in [0, pi/2], phi in [0, pi]``.

    The domain is split into two polar sectors around the singular corner and
    graded dyadically in the normalized radius; cells are bisected greedily until
    the summed error estimate (difference of two tensor Gauss rules) falls below
    ``max(tol * |value|, atol)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    f = _Integrand(kernel, idx, params)
    lo, hi = orders
    rho_edges = [0.0, 1 / 64, 1 / 16, 1 / 4, 1 / 2, 1.0]
    heap: list = []
    total = 0.0
    err_total = 0.0
    count = 0
    for s_id, sector in enumerate(_SECTORS):
        pm = 0.5 * (sector.psi_lo + sector.psi_hi)
        for r0, r1 in zip(rho_edges[:-1], rho_edges[1:]):
            for p0, p1 in ((sector.psi_lo, pm), (pm, sector.psi_hi)):
                cell = (r0, r1, p0, p1)
                v_hi = _cell_rule(f, sector, cell, hi)
                e = abs(v_hi - _cell_rule(f, sector, cell, lo))
                heapq.heappush(heap, (-e, count, s_id, cell, v_hi))
                count += 1
                total += v_hi
                err_total += e
    while err_total > max(tol * abs(total), atol):
        if len(heap) > max_cells:
            raise QuadratureError(
                f"no convergence for {kernel.label} at {idx}: estimate {total:.6g} +- {err_total:.2g}"
            )
        neg_e, _, s_id, cell, v = heapq.heappop(heap)
        total -= v
        err_total += neg_e
        sector = _SECTORS[s_id]
        r0, r1, p0, p1 = cell
        rm, pm = 0.5 * (r0 + r1), 0.5 * (p0 + p1)
        for child in ((r0, rm, p0, pm), (rm, r1, p0, pm), (r0, rm, pm, p1), (rm, r1, pm, p1)):
            v_hi = _cell_rule(f, sector, child, hi)
            e = abs(v_hi - _cell_rule(f, sector, child, lo))
            heapq.heappush(heap, (-e, count, s_id, child, v_hi))
            count += 1
            total += v_hi
            err_total += e
        # guard against drift from repeated add/subtract
        if count % 256 == 0:
            total = math.fsum(item[4] for item in heap)
            err_total = math.fsum(-item[0] for item in heap)
    pref = funk_hecke_prefactor(idx, params)
    total = math.fsum(item[4] for item in heap)
    err_total = math.fsum(-item[0] for item in heap)
    if detail:
        return QuadratureResult(pref * total, pref * err_total, len(heap), count)
    return pref * total


def eig_quadrature_s3(kernel: ReducedKernel, idx: EigenIndex, params: GroupParams, order: int = 48) -> float:
    """Slow check of the reduction: the inner ``S^3`` integral is done with a full
    product Gauss rule over ``(phi, phi2, phi1)`` instead of the ``4 pi`` shortcut.

    Only suitable for bounded kernels.
    """
    n = params.n
    jac = JacobiParams(idx.k, 2 * n - 1, idx.m + 1)
    xs, ws = roots_legendre(order)
    th = 0.25 * math.pi * (xs + 1.0)
    wth = 0.25 * math.pi * ws
    ph = 0.5 * math.pi * (xs + 1.0)
    wph = 0.5 * math.pi * ws
    ph1 = math.pi * (xs + 1.0)
    wph1 = math.pi * ws
    T, P, P2, P1 = np.meshgrid(th, ph, ph, ph1, indexing="ij")
    W = np.einsum("a,b,c,d->abcd", wth, wph, wph, wph1)
    t = np.cos(T)
    u = np.stack([np.cos(P), np.sin(P) * np.cos(P2), np.sin(P) * np.sin(P2) * np.cos(P1),
                  np.sin(P) * np.sin(P2) * np.sin(P1)], axis=-1)
    q = t[..., None] * u
    x = u[..., 0]
    d = (1.0 - q[..., 0]) ** 2 + np.sum(q[..., 1:] ** 2, axis=-1)
    integrand = (
        np.sin(T) ** (4 * n - 1)
        * t ** (idx.m + 3)
        * jacobi_p(jac, 2 * t * t - 1)
        * kernel.func(t, x, d)
        * chebyshev_u_ratio(idx.m, P)
        * np.sin(P) ** 2
        * np.sin(P2)
    )
    return funk_hecke_prefactor(idx, params) * float(np.sum(W * integrand))


# -- closed forms ---------------------------------------------------------------


def _check_alpha(alpha: float, params: GroupParams) -> None:
    if not (0 < alpha < params.Q / 4):
        raise SpectralDomainError(f"alpha must lie in (0, Q/4) = (0, {params.Q / 4}), got {alpha}")


def _signed_log_rising(x: float, m: int) -> tuple[float, float]:
    """``(sign, log|x|_m)`` of the Pochhammer symbol; sign 0 flags an exact zero."""
    sign, logabs = 1.0, 0.0
    i = 0
    while i < m and x + i <= 0:
        f = x + i
        if f == 0:
            return 0.0, -math.inf
        sign = -sign if f < 0 else sign
        logabs += math.log(abs(f))
        i += 1
    if i < m:
        logabs += math.lgamma(x + m) - math.lgamma(x + i)
    return sign, logabs


def eig_k1_closed(alpha, idx: EigenIndex, params: GroupParams) -> float:
    """``lambda_{j,k}(K_1^alpha)`` written with finite Gamma ratios:

    ``2 pi^{2n+2} Gamma(Q/2-2alpha) (alpha)_j (alpha-1)_k / (Gamma(j+Q/2-alpha) Gamma(k+Q/2-alpha-1))``.

    At ``alpha = 1`` the factor ``(0)_k`` makes every ``k >= 1`` value exactly zero.
    """
    al = float(alpha)
    _check_alpha(al, params)
    half_q = params.Q / 2
    s1, l1 = _signed_log_rising(al, idx.j)
    s2, l2 = _signed_log_rising(al - 1.0, idx.k)
    if s1 * s2 == 0:
        return 0.0
    log_val = (
        math.log(2.0)
        + (2 * params.n + 2) * math.log(math.pi)
        + math.lgamma(half_q - 2 * al)
        - math.lgamma(idx.j + half_q - al)
        - math.lgamma(idx.k + half_q - al - 1)
        + l1
        + l2
    )
    return s1 * s2 * math.exp(log_val)


def eig_k1_normalized(alpha, idx: EigenIndex, params: GroupParams) -> Fraction:
    """``e(j,k) = lambda_{j,k}(K_1^alpha) / lambda_{0,0}(K_1^alpha)`` as an exact rational:
    ``(alpha)_j (alpha-1)_k / ((Q/2-alpha)_j (Q/2-alpha-1)_k)``."""
    al = as_fraction(alpha)
    half_q = Fraction(params.Q, 2)
    return rising(al, idx.j) * rising(al - 1, idx.k) / (
        rising(half_q - al, idx.j) * rising(half_q - al - 1, idx.k)
    )


def eig_k1_shift_normalized(alpha, idx: EigenIndex, params: GroupParams) -> Fraction:
    """``lambda_{j,k}(K_1^{alpha-1}) / lambda_{0,0}(K_1^alpha)`` as an exact rational."""
    al = as_fraction(alpha)
    h = Fraction(params.Q, 2)
    s = h - 2 * al
    return (
        s * (s + 1) * rising(al - 1, idx.j) * rising(al - 2, idx.k)
        / ((h - al) * rising(h - al + 1, idx.j) * rising(h - al - 1, idx.k + 1))
    )


def c_coefficient_expanded(alpha, idx: EigenIndex, params: GroupParams):
    """The second printed form of ``C^alpha_{j,k}``, written directly in ``(j, k, Q)``."""
    al = as_fraction(alpha) if not isinstance(alpha, float) else alpha
    j, k, h = idx.j, idx.k, Fraction(params.Q, 2) if not isinstance(alpha, float) else params.Q / 2
    num = (
        -((j + al) ** 2)
        - (k + al - 1) ** 2
        + (j + k + h) * (j + 2 * al + k - 1)
        - 2 * (j + k + h - 1)
        - (al - 2) * (h - 2 * al + 1)
    )
    den = (j + al - 1) * (k + al - 2) * (k + h - al - 1) * (j + h - al)
    return 1 - (al - 2) * (h - 2 * al) * num / den


def _c_times_ab(al, tri: AbcTriple):
    """``C * (a-1) * (b-1)``: the pole-free numerator of ``C^alpha_{j,k}``."""
    A, B = tri.a - 1, tri.b - 1
    ca, cb, s = tri.c - tri.a, tri.c - tri.b, tri.excess
    return A * B - (al - 2) * s * (B / ca + A / cb - (al - 2) * (s + 1) / (ca * cb))


def _c_row_zero(al, tri: AbcTriple):
    """``C^alpha_{j,0}``: with ``k = 0`` one has ``b - 1 = alpha - 2`` and the
    ``(a, b, c)`` form collapses to ``1 - s (alpha - 2 + c - a) / ((c-a)(c-b))``,
    which has no pole at ``alpha in {1, 2}``."""
    ca, cb, s = tri.c - tri.a, tri.c - tri.b, tri.excess
    return 1 - s * (al - 2 + ca) / (ca * cb)


def c_coefficient(alpha, idx: EigenIndex, params: GroupParams):
    """``C^alpha_{j,k}`` from the ``(a, b, c)`` form; exact for rational ``alpha``.

    Where ``a-1`` or ``b-1`` vanishes the value is the limit in ``alpha`` at fixed
    ``(j, k)``.  The only pole left after that is ``alpha = 1, k = 1``, where
    ``C`` is genuinely infinite (but ``C e`` is not, see :func:`c_times_e`).
    """
    al = as_fraction(alpha)
    tri = AbcTriple.build(al, idx, params)
    if idx.k == 0:
        return _c_row_zero(al, tri)
    A, B = tri.a - 1, tri.b - 1
    if B == 0:
        raise SpectralDomainError(f"C^alpha_(j,k) has a genuine pole at alpha={al}, k={idx.k}")
    return _c_times_ab(al, tri) / (A * B)


def c_times_e(alpha, idx: EigenIndex, params: GroupParams) -> Fraction:
    """``C^alpha_{j,k} e(j,k) = lambda_{j,k}(K_2^alpha) / lambda_{0,0}(K_1^alpha)``, exact.

    The factors ``a-1 = j+alpha-1`` and ``b-1 = k+alpha-2`` of the denominator of
    ``C`` are cancelled against the Pochhammer symbols in ``e`` where present,
    so this stays finite where ``C`` alone blows up (``alpha=1, k=1``).
    """
    al = as_fraction(alpha)
    h = Fraction(params.Q, 2)
    tri = AbcTriple.build(al, idx, params)
    A, B = tri.a - 1, tri.b - 1
    j, k = idx.j, idx.k
    if k == 0:
        return _c_row_zero(al, tri) * eig_k1_normalized(al, idx, params)
    # k >= 1 implies j >= 1: B and A are the trailing factors of (alpha-1)_k and (alpha)_j
    return _c_times_ab(al, tri) * rising(al, j - 1) * rising(al - 1, k - 1) / (
        rising(h - al, j) * rising(h - al - 1, k)
    )


def eig_k2_closed(alpha, idx: EigenIndex, params: GroupParams) -> float:
    """``lambda_{j,k}(K_2^alpha) = C^alpha_{j,k} lambda_{j,k}(K_1^alpha)``.

    Rational ``alpha`` (anything :func:`as_fraction` reproduces exactly) goes
    through :func:`c_times_e`, so the removable poles at ``alpha in {1, 2}``
    are resolved exactly.
    """
    al_f = float(alpha)
    _check_alpha(al_f, params)
    frac = as_fraction(alpha)
    if float(frac) == al_f:
        return float(c_times_e(frac, idx, params)) * eig_k1_closed(al_f, EigenIndex(0, 0), params)
    tri_a, tri_b = idx.j + al_f - 1, idx.k + al_f - 2
    h = params.Q / 2
    ca, cb, s = idx.k + h - 1 - al_f, idx.j + h - al_f, h - 2 * al_f
    c = 1 - (al_f - 2) * s * (1 / (tri_a * ca) + 1 / (tri_b * cb) - (al_f - 2) * (s + 1) / (tri_a * tri_b * ca * cb))
    return c * eig_k1_closed(al_f, idx, params)


def intertwine_spectrum(d: float, idx: EigenIndex, params: GroupParams) -> float:
    """``lambda_{j,k}(A_d) = Gamma(j+(Q+d)/4)/Gamma(j+(Q-d)/4) * Gamma(k+(Q+d)/4-1)/Gamma(k+(Q-d)/4-1)``."""
    Q = params.Q
    if not 0 < d < Q:
        raise SpectralDomainError(f"d must lie in (0, Q), got {d}")
    return float(poch(idx.j + (Q - d) / 4, d / 2) * poch(idx.k + (Q - d) / 4 - 1, d / 2))


def hls_exponent(lam: float, params: GroupParams) -> float:
    """``p = 2Q / (2Q - lambda)``."""
    return 2 * params.Q / (2 * params.Q - lam)


def second_variation_coef(lam: float, idx: EigenIndex, params: GroupParams) -> float:
    """``s(j,k) = lambda_{j,k} - (p-1) lambda_{0,0}`` for ``K_1^{lambda/4}``."""
    if not 0 < lam < params.Q:
        raise SpectralDomainError(f"lambda must lie in (0, Q), got {lam}")
    alpha = lam / 4
    l00 = eig_k1_closed(alpha, EigenIndex(0, 0), params)
    pm1 = lam / (2 * params.Q - lam)
    return eig_k1_closed(alpha, idx, params) - pm1 * l00


def bilinear_margin(alpha, idx: EigenIndex, params: GroupParams) -> Fraction:
    """Exact margin ``D(j,k) = e(1+C) - R e - (2 alpha / (Q/2 - alpha)) e`` where all
    eigenvalues are normalized by ``lambda_{0,0}(K_1^alpha)``."""
    al = as_fraction(alpha)
    h = Fraction(params.Q, 2)
    if not (0 < al < h / 2):
        raise SpectralDomainError(f"alpha must lie in (0, Q/4), got {al}")
    e = eig_k1_normalized(al, idx, params)
    return e + c_times_e(al, idx, params) - eig_k1_shift_normalized(al, idx, params) - 2 * al / (h - al) * e


@dataclass(frozen=True)
class EigenRow:
    n: int
    alpha: float
    j: int
    k: int
    closed_form: float
    oracle: float

    @property
    def abs_gap(self) -> float:
        return abs(self.closed_form - self.oracle)

    @property
    def rel_gap(self) -> float:
        scale = abs(self.closed_form)
        return self.abs_gap / scale if scale > 0 else math.inf if self.abs_gap > 0 else 0.0


@dataclass
class EigenTable:
    """Closed form vs. quadrature oracle on a ``(j, k)`` lattice."""

    params: GroupParams
    alpha: float
    kernel: str
    rows: list[EigenRow]

    CSV_COLUMNS = ("n", "alpha", "j", "k", "closed_form", "oracle", "abs_gap", "rel_gap")

    def csv_rows(self) -> list[tuple]:
        return [(r.n, r.alpha, r.j, r.k, r.closed_form, r.oracle, r.abs_gap, r.rel_gap) for r in self.rows]

    def gap_ok(self, rtol: float, zero_atol: float = 1e-8) -> list[EigenRow]:
        """Rows violating the tolerance (exact zeros compared absolutely)."""
        bad = []
        for r in self.rows:
            if r.closed_form == 0.0:
                if r.abs_gap > zero_atol:
                    bad.append(r)
            elif r.rel_gap > rtol:
                bad.append(r)
        return bad


def eigen_table(alpha: float, params: GroupParams, jmax: int, kernel: str = "k1", tol: float = 1e-11) -> EigenTable:
    """Build the closed-form vs. oracle table for ``K1`` or ``K2`` up to ``jmax``."""
    if kernel == "k1":
        kern, closed = kernel_k1(alpha), eig_k1_closed
    elif kernel == "k2":
        kern, closed = kernel_k2(alpha), eig_k2_closed
    else:
        raise ValueError(f"unknown kernel {kernel!r}")
    rows = []
    for idx in lattice(jmax):
        rows.append(EigenRow(params.n, float(alpha), idx.j, idx.k, closed(alpha, idx, params),
                             eig_quadrature(kern, idx, params, tol=tol)))
    return EigenTable(params, float(alpha), kernel, rows)


@dataclass
class MarginSweep:
    """Exact bilinear margins on ``0 <= k <= j <= jmax``."""

    alpha: Fraction
    n: int
    jmax: int
    margins: dict

    def violations(self) -> list[EigenIndex]:
        return sorted(idx for idx, d in self.margins.items() if d < 0)

    def zeros(self) -> list[EigenIndex]:
        return sorted(idx for idx, d in self.margins.items() if d == 0)

    def first_violation(self, k: int | None = None) -> EigenIndex | None:
        """Smallest ``j`` violating (optionally within row ``k``), ties broken by ``k``."""
        cands = [idx for idx in self.violations() if k is None or idx.k == k]
        return min(cands, key=lambda i: (i.j, i.k)) if cands else None

    def csv_rows(self) -> list[tuple]:
        return [
            (self.n, str(self.alpha), idx.j, idx.k, str(d), float(d))
            for idx, d in sorted(self.margins.items())
        ]


def _prefix_rising(x: Fraction, m: int) -> list[Fraction]:
    out = [Fraction(1)]
    for i in range(m):
        out.append(out[-1] * (x + i))
    return out


def bilinear_sweep(alpha, params: GroupParams, jmax: int) -> MarginSweep:
    """All margins up to ``jmax`` with Pochhammer prefix products shared across cells.

    Produces the same values as :func:`bilinear_margin` cell by cell.
    """
    al = as_fraction(alpha)
    h = Fraction(params.Q, 2)
    if not (0 < al < h / 2):
        raise SpectralDomainError(f"alpha must lie in (0, Q/4), got {al}")
    r_a = _prefix_rising(al, jmax + 1)
    r_am1 = _prefix_rising(al - 1, jmax + 1)
    r_am2 = _prefix_rising(al - 2, jmax + 1)
    r_h = _prefix_rising(h - al, jmax + 1)
    r_h1 = _prefix_rising(h - al - 1, jmax + 2)
    r_hp = _prefix_rising(h - al + 1, jmax + 1)
    s = h - 2 * al
    shift_const = s * (s + 1) / (h - al)
    lin = 2 * al / (h - al)
    margins = {}
    for j in range(jmax + 1):
        ej = r_a[j] / r_h[j]
        sj = r_am1[j] / r_hp[j]
        A = j + al - 1
        cb = j + h - al
        for k in range(j + 1):
            idx = EigenIndex(j, k)
            e = ej * r_am1[k] / r_h1[k]
            shift = shift_const * sj * r_am2[k] / r_h1[k + 1]
            ca = k + h - 1 - al
            if k == 0:
                ce = (1 - s * (al - 2 + ca) / (ca * cb)) * e
            else:
                B = k + al - 2
                cab = A * B - (al - 2) * s * (B / ca + A / cb - (al - 2) * (s + 1) / (ca * cb))
                ce = cab * r_a[j - 1] * r_am1[k - 1] / (r_h[j] * r_h1[k])
            margins[idx] = e + ce - shift - lin * e
    return MarginSweep(al, params.n, jmax, margins)
