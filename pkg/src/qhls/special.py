"""Scalar special functions: Gamma ratios, Jacobi polynomials, the unit-argument
Gauss sum and the Gegenbauer expansion of ``(1 + t^2 - 2t cos(phi))^{-alpha}``."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

import numpy as np
from scipy import integrate

# Series truncation constants, shared by every series in this module.
SERIES_REL_TERM = 1e-16
SERIES_TAIL = 1e-12
SERIES_MAX_TERMS = 200_000


class DomainError(ValueError):
    """Argument outside the domain of a special function."""


class DivergenceError(ArithmeticError):
    """A series or closed form is evaluated outside its convergence region."""


def log_gamma(x: float) -> float:
    """``log Gamma(x)`` for ``x > 0`` (backed by :func:`math.lgamma`)."""
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def gamma_ratio(x, m: int):
    """``Gamma(x+m)/Gamma(x)`` as the finite product ``prod_{i<m} (x+i)``.

    Exact for :class:`fractions.Fraction` or int input.  A zero factor is allowed
    (the ratio is then 0); it is the limiting value used for the pole
    cancellations in the eigenvalue formulas.  Negative ``m`` gives the
    reciprocal product and raises if it hits a pole.
    """
    m = int(m)
    exact = isinstance(x, Rational)
    one = Fraction(1) if exact else 1.0
    out = one
    if m >= 0:
        for i in range(m):
            out *= x + i
        return out
    for i in range(1, -m + 1):
        f = x - i
        if f == 0:
            raise DomainError(f"gamma_ratio({x}, {m}) crosses a pole")
        out /= f
    return out


def rising(x, m: int):
    """Pochhammer symbol ``(x)_m``; alias of :func:`gamma_ratio` for ``m >= 0``."""
    if m < 0:
        raise DomainError("rising factorial needs m >= 0")
    return gamma_ratio(x, m)


# -- Jacobi polynomials -------------------------------------------------------


@dataclass(frozen=True)
class JacobiParams:
    """Degree ``k`` and weight exponents of ``P_k^{(alpha_w, beta_w)}``."""

    k: int
    alpha_w: float
    beta_w: float

    def __post_init__(self):
        if self.k < 0 or int(self.k) != self.k:
            raise DomainError("Jacobi degree must be a nonnegative integer")
        if not (self.alpha_w > -1 and self.beta_w > -1):
            raise DomainError("Jacobi weight exponents must exceed -1")

    def value_at_one(self) -> float:
        """``P_k(1) = (alpha_w+1)_k / k!``."""
        return gamma_ratio(float(self.alpha_w) + 1.0, self.k) / math.factorial(self.k)


def jacobi_p(params: JacobiParams, x):
    """``P_k^{(a,b)}(x)`` by the standard three-term recurrence."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) > 1 + 1e-12):
        raise DomainError("jacobi_p needs |x| <= 1")
    k, a, b = params.k, float(params.alpha_w), float(params.beta_w)
    p_prev = np.ones_like(x)
    if k == 0:
        return p_prev
    p = 0.5 * (a - b + (a + b + 2.0) * x)
    for m in range(2, k + 1):
        s = 2 * m + a + b
        c1 = 2.0 * m * (m + a + b) * (s - 2.0)
        c2 = (s - 1.0) * (a * a - b * b)
        c3 = (s - 2.0) * (s - 1.0) * s
        c4 = 2.0 * (m + a - 1.0) * (m + b - 1.0) * s
        p, p_prev = ((c2 + c3 * x) * p - c4 * p_prev) / c1, p
    return p


def jacobi_rodrigues(params: JacobiParams, x: float) -> float:
    """Rodrigues-formula evaluation through sympy; a slow oracle for small ``k``."""
    import sympy as sp

    t = sp.Symbol("t")
    k = params.k
    a = sp.nsimplify(params.alpha_w)
    b = sp.nsimplify(params.beta_w)
    expr = (
        (-1) ** k
        / (2**k * sp.factorial(k))
        * (1 - t) ** (-a)
        * (1 + t) ** (-b)
        * sp.diff((1 - t) ** (a + k) * (1 + t) ** (b + k), t, k)
    )
    return float(sp.simplify(expr).subs(t, sp.nsimplify(x)).evalf(30))


# -- Gauss sum ----------------------------------------------------------------


def gauss_a(a: float, b: float, c: float) -> float:
    """``A(a,b,c) = sum_mu Gamma(mu+a)Gamma(mu+b)/(mu! Gamma(mu+c))`` in closed form
    ``Gamma(a)Gamma(b)Gamma(c-a-b)/(Gamma(c-a)Gamma(c-b))`` (needs ``c > a+b``)."""
    lo, hi = (a, b) if a <= b else (b, a)
    if not c - lo - hi > 0:
        raise DivergenceError(f"A(a,b,c) diverges unless c > a+b (got a={a}, b={b}, c={c})")
    return math.gamma(lo) * math.gamma(hi) * math.gamma(c - lo - hi) / (
        math.gamma(c - lo) * math.gamma(c - hi)
    )


def gauss_a_series(a: float, b: float, c: float) -> float:
    """Summation of the defining series; oracle for :func:`gauss_a`.

    Terms decay only like ``mu^{a+b-c-1}``, so plain truncation is hopeless
    near ``c = a+b``; the partial sums are accelerated with the Levin transform
    of :func:`mpmath.nsum`.
    """
    import mpmath

    if not c - a - b > 0:
        raise DivergenceError("series diverges unless c > a+b")
    with mpmath.workdps(30):
        total = mpmath.nsum(
            lambda mu: mpmath.gamma(mu + a) * mpmath.gamma(mu + b) / (mpmath.gamma(mu + 1) * mpmath.gamma(mu + c)),
            [0, mpmath.inf],
            method="levin",
        )
        return float(total)


# -- Gegenbauer expansion -----------------------------------------------------


def gegenbauer_phi_integral(alpha: float, m: int, t: float) -> float:
    """``int_0^pi (1 + t^2 - 2t cos phi)^{-alpha} cos(m phi) dphi`` as the series

    ``pi * sum_mu t^{m+2mu} (alpha)_mu (alpha)_{m+mu} / (mu! (m+mu)!)``,

    truncated once a geometric bound on the tail drops below ``SERIES_TAIL``
    relative to the partial sum (all terms are positive).
    """
    if not 0 <= t < 1:
        raise DomainError("gegenbauer_phi_integral needs 0 <= t < 1")
    if not alpha > 0:
        raise DomainError("alpha must be positive")
    if m < 0:
        raise DomainError("m must be nonnegative")
    term = t**m * rising(alpha, m) / math.factorial(m) if m else 1.0
    if t == 0:
        return math.pi if m == 0 else 0.0
    total = 0.0
    t2 = t * t
    for mu in range(SERIES_MAX_TERMS):
        total += term
        ratio = t2 * (alpha + mu) * (alpha + m + mu) / ((mu + 1) * (m + mu + 1))
        term *= ratio
        # the ratios are monotone in mu and tend to t^2, so max(ratio, t^2) bounds all later ones
        bound = max(ratio, t2)
        if bound < 1 and term / (1 - bound) < SERIES_TAIL * total:
            break
    else:
        raise DivergenceError("Gegenbauer series did not converge")
    return math.pi * total


def gegenbauer_phi_quad(alpha: float, m: int, t: float) -> float:
    """Adaptive 1D quadrature of the same integral (oracle)."""
    val, _ = integrate.quad(
        lambda p: (1 + t * t - 2 * t * math.cos(p)) ** (-alpha) * math.cos(m * p),
        0.0,
        math.pi,
        epsabs=1e-13,
        epsrel=1e-13,
        limit=500,
    )
    return val
