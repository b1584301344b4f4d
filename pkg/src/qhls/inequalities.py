"""Sharp HLS, Sobolev and log-Sobolev constants on the quaternionic sphere, the
extremal family, and Monte Carlo evaluation of the HLS functional."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.special import rgamma
from scipy.stats import norm as normal_dist
from scipy.stats import qmc

from .group import GroupParams
from .montecarlo import MeanEstimate, MonteCarloConfig, OffsetSampler, chunk_rng, chunked_map, partner_points
from .quaternion import qdot, qnorm2
from .spectral import EigenIndex, eig_k1_closed, hls_exponent
from .sphere import ConformalMap, SpherePoint, conformal_gamma, conformal_jacobian, dist_s, sample_sphere

SphereFunction = Callable[[SpherePoint], np.ndarray]

MIN_PAIR_DISTANCE = 1e-9
MAX_RESAMPLE = 1000


class ConstantDomainError(ValueError):
    """Parameter outside the range where a constant is defined."""


@dataclass(frozen=True)
class ConstantsReport:
    """Sharp constants for one ``(n, lambda)`` or ``(n, d)``; unused fields are ``None``."""

    n: int
    Q: int
    p: float
    lambda_: float | None = None
    d: float | None = None
    C_lambda: float | None = None
    C_prime_lambda: float | None = None
    c_d: float | None = None
    c_prime_d: float | None = None
    C_tilde_d: float | None = None
    C_tilde_prime_d: float | None = None
    logsob_C: float | None = None
    flags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        out = asdict(self)
        out["lambda"] = out.pop("lambda_")
        out["flags"] = list(self.flags)
        return out


# -- constants -------------------------------------------------------------------


def _check_lambda(lam: float, params: GroupParams) -> None:
    if not 0 < lam < params.Q:
        raise ConstantDomainError(f"lambda must lie in (0, Q) = (0, {params.Q}), got {lam}")


def c_prime_forms(lam: float, params: GroupParams) -> tuple[float, float, float]:
    """``C'_lambda`` three ways: ``2^{(4n+3)lambda/Q} C_lambda`` (via the first printed
    ``C_lambda``), the explicit ``|S|`` form, and the factorial form."""
    _check_lambda(lam, params)
    n, Q, S = params.n, params.Q, params.sphere_area
    p = hls_exponent(lam, params)
    g = math.gamma((Q - lam) / 2) / (math.gamma((2 * Q - lam) / 4) * math.gamma((2 * Q - lam) / 4 - 1))
    fact = math.gamma((Q - 4) / 2 + 1)
    via_c = 2 ** ((4 * n + 3) * lam / Q) * c_lambda_forms(lam, params)[0]
    explicit = 2 ** (1 + lam / 2) * math.pi ** (2 * n + 2) * g * S ** (1 - 2 / p)
    factorial = (2 * math.pi ** ((Q - 2) / 2) / fact) ** (lam / Q) * 2 ** (lam / 2) * fact * g
    return via_c, explicit, factorial


def c_lambda_forms(lam: float, params: GroupParams) -> tuple[float, float]:
    """The two printed forms of the group constant ``C_lambda``."""
    _check_lambda(lam, params)
    n, Q, S = params.n, params.Q, params.sphere_area
    p = hls_exponent(lam, params)
    g = math.gamma((Q - lam) / 2) / (math.gamma((2 * Q - lam) / 4) * math.gamma((2 * Q - lam) / 4 - 1))
    fact = math.gamma((Q - 4) / 2 + 1)
    first = 2 ** (1 - 2 * n * lam / Q) * math.pi ** (2 * n + 2) * g * S ** (1 - 2 / p)
    second = (math.pi ** ((Q - 2) / 2) / 2 ** ((Q - 8) / 2)) ** (lam / Q) * fact ** (1 - lam / Q) * g
    return first, second


def c_prime_spectral(lam: float, params: GroupParams) -> float:
    """``C'_lambda = 2^{lambda/2} |S|^{1-2/p} lambda_{0,0}(K_1^{lambda/4})`` (value at ``f = g = 1``)."""
    _check_lambda(lam, params)
    p = hls_exponent(lam, params)
    return 2 ** (lam / 2) * params.sphere_area ** (1 - 2 / p) * eig_k1_closed(lam / 4, EigenIndex(0, 0), params)


def c_prime_mpmath(lam, params: GroupParams, dps: int = 50):
    """High-precision evaluation of the explicit ``C'_lambda`` form with mpmath."""
    import mpmath

    with mpmath.workdps(dps):
        lam = mpmath.mpf(lam)
        n, Q = params.n, mpmath.mpf(params.Q)
        S = 2 * mpmath.pi ** (2 * n + 2) / mpmath.factorial(2 * n + 1)
        p = 2 * Q / (2 * Q - lam)
        g = mpmath.gamma((Q - lam) / 2) / (mpmath.gamma((2 * Q - lam) / 4) * mpmath.gamma((2 * Q - lam) / 4 - 1))
        return +(2 ** (1 + lam / 2) * mpmath.pi ** (2 * n + 2) * g * S ** (1 - 2 / p))


def sharp_hls_constants(lam: float, params: GroupParams) -> ConstantsReport:
    """``C_lambda`` and ``C'_lambda``; the ``C'`` value is the spectral one."""
    _check_lambda(lam, params)
    c_prime = c_prime_spectral(lam, params)
    c = 2 ** (-(4 * params.n + 3) * lam / params.Q) * c_prime
    flags = []
    if lam < 4:
        flags.append("below_sharpness_range")
    elif lam == 4:
        flags.append("lambda_4_equality_via_euler_lagrange")
    return ConstantsReport(params.n, params.Q, hls_exponent(lam, params), lambda_=lam,
                           C_lambda=c, C_prime_lambda=c_prime, flags=tuple(flags))


def c_prime_d(d: float, params: GroupParams) -> float:
    """``c'_d`` from ``1/c'_d = 2^{(Q-d)/2+1} pi^{Q/2-1} Gamma(d/2) / (Gamma((Q-d)/4) Gamma((Q-d)/4-1))``.

    At ``d = Q - 4`` the reciprocal vanishes and ``c'_d`` is infinite.
    """
    Q = params.Q
    if not 0 < d < Q:
        raise ConstantDomainError(f"d must lie in (0, Q), got {d}")
    inv = (2 ** ((Q - d) / 2 + 1) * math.pi ** (Q / 2 - 1) * math.gamma(d / 2)
           * rgamma((Q - d) / 4) * rgamma((Q - d) / 4 - 1))
    return math.inf if inv == 0 else 1.0 / float(inv)


def sobolev_constants(d: float, params: GroupParams) -> ConstantsReport:
    """``c_d, c'_d`` and the Sobolev constants ``C~_d = 1/(c_d C_{Q-d})``, ``C~'_d = 1/(c'_d C'_{Q-d})``."""
    Q = params.Q
    if not 0 < d <= Q - 4:
        raise ConstantDomainError(f"d must lie in (0, Q-4] = (0, {Q - 4}], got {d}")
    cp = c_prime_d(d, params)
    c = 2 ** (Q - d - 3) * cp
    hls = sharp_hls_constants(Q - d, params)
    return ConstantsReport(
        params.n, Q, 2 * Q / (Q - d), d=d, c_d=c, c_prime_d=cp,
        C_tilde_d=1.0 / (c * hls.C_lambda), C_tilde_prime_d=1.0 / (cp * hls.C_prime_lambda),
        C_lambda=hls.C_lambda, C_prime_lambda=hls.C_prime_lambda,
    )


def sublaplacian_kernel_constant(params: GroupParams) -> float:
    """``Gamma(n+1) Gamma(n) / (2^{2n+3} pi^{2n+2})``, the printed constant of the
    inverse conformal sublaplacian."""
    n = params.n
    return math.gamma(n + 1) * math.gamma(n) / (2 ** (2 * n + 3) * math.pi ** (2 * n + 2))


def logsob_constant(params: GroupParams) -> float:
    """``C = 2^{Q/2+3} pi^{Q/2-1} / (Q Gamma(Q/4-1) Gamma(Q/4))``."""
    Q = params.Q
    return 2 ** (Q / 2 + 3) * math.pi ** (Q / 2 - 1) / (Q * math.gamma(Q / 4 - 1) * math.gamma(Q / 4))


def logsob_limit_proxy(lam: float, params: GroupParams) -> float:
    """``2 C'_lambda (Q - lambda) / Q``: the finite-``lambda`` value whose limit at
    ``lambda -> Q`` is the log-Sobolev constant, following the proof chain
    ``2C'(|S|^{2/p} - |f|_p^2) = 2C'(Q-lambda) * (...)/(Q-lambda)`` with
    ``(...)/(Q-lambda) -> int f^2 log f^2 / Q``."""
    return 2 * c_prime_spectral(lam, params) * (params.Q - lam) / params.Q


def logsob_literal_expression(lam: float, params: GroupParams) -> float:
    """``2 C'_lambda (p-2) / (Q-lambda)`` taken literally (diverges as ``lambda -> Q``)."""
    p = hls_exponent(lam, params)
    return 2 * c_prime_spectral(lam, params) * (p - 2) / (params.Q - lam)


# -- extremizers -------------------------------------------------------------------


@dataclass(frozen=True)
class ExtremizerSpec:
    """``|1 - xi . conj(zeta)|^{-(2Q-lambda)/2}`` with ``|xi| < 1``."""

    xi: np.ndarray
    lam: float

    def __post_init__(self):
        xi = np.asarray(self.xi, dtype=float)
        if xi.ndim != 2 or xi.shape[-1] != 4:
            raise ValueError("xi must have shape (n+1, 4)")
        if not float(np.sum(xi * xi)) < 1.0:
            raise ConstantDomainError("extremizer parameter needs |xi| < 1")
        object.__setattr__(self, "xi", xi)

    @property
    def n(self) -> int:
        return self.xi.shape[0] - 1

    @property
    def exponent(self) -> float:
        return (2 * (4 * self.n + 6) - self.lam) / 2

    @classmethod
    def axial(cls, n: int, r: float, lam: float) -> "ExtremizerSpec":
        xi = np.zeros((n + 1, 4))
        xi[-1, 0] = r
        return cls(xi, lam)

    def __call__(self, z) -> np.ndarray:
        return extremizer_s(self, z)


def extremizer_s(spec: ExtremizerSpec, z) -> np.ndarray:
    zeta = z.zeta if isinstance(z, SpherePoint) else np.asarray(z, dtype=float)
    x = -qdot(spec.xi, zeta)
    x[..., 0] += 1.0
    return qnorm2(x) ** (-spec.exponent / 2)


def conformal_push(f: SphereFunction, m: ConformalMap, p: float) -> SphereFunction:
    """``zeta -> f(gamma^{-1} zeta) |J_{gamma^{-1}}(zeta)|^{1/p}``."""
    inv = m.inverse()

    def pushed(z):
        return f(conformal_gamma(inv, z)) * conformal_jacobian(inv, z) ** (1.0 / p)

    return pushed


def pushed_extremizer_xi(m: ConformalMap) -> np.ndarray:
    """The ``xi`` of the extremizer obtained by pushing ``f = 1`` through ``m``:
    ``((1 - delta^2)/(1 + delta^2)) xi_map``."""
    d2 = m.delta**2
    return (1 - d2) / (1 + d2) * m.xi.zeta


# -- Monte Carlo functionals -------------------------------------------------------


@dataclass(frozen=True)
class FunctionalEstimate:
    estimate: float
    std_error: float
    rejected: int = 0
    bias_bound: float = 0.0


def _rejected_kernel_mass(lam: float, params: GroupParams, radius: float = MIN_PAIR_DISTANCE) -> float:
    """Upper bound on ``|S| int_{d_S < radius} d_S^{-lambda} deta``; multiply by
    ``sup |f g|`` for the bias caused by rejecting close pairs."""
    n = params.n
    # d_S < radius means |1-x|^2 < 4 radius^4, i.e. polar r < 2 radius^2 / sqrt(c0)
    c0 = (2 / math.pi) ** 2 * 0.5
    rho = 2 * radius**2 / math.sqrt(c0)
    expo = 2 * n + 3 - lam / 2
    s4n1 = 2 * math.pi ** (2 * n) / math.factorial(2 * n - 1)
    inner = s4n1 * 4 * math.pi * 2 ** (2 * n - 1) * 2 ** (lam / 2) * c0 ** (-lam / 4) * (math.pi / 2) * rho**expo / expo
    return params.sphere_area * inner


def _focused_points(rng, size: int, n: int, focus: ConformalMap | None):
    """Uniform points, or with ``focus`` a 50/50 mixture of uniform points and their
    images under ``focus``.  Returns the points and ``(1/|S|) / q``."""
    zeta = rng.standard_normal((size, n + 1, 4))
    zeta /= np.linalg.norm(zeta.reshape(size, -1), axis=1)[:, None, None]
    if focus is None:
        return zeta, np.ones(size)
    moved = rng.random(size) < 0.5
    if moved.any():
        zeta[moved] = conformal_gamma(focus, zeta[moved]).zeta
    # density of focus(U) relative to uniform is |J_{focus^{-1}}|
    rel = 0.5 + 0.5 * conformal_jacobian(focus.inverse(), zeta)
    return zeta, 1.0 / rel


def _pair_terms(f, g, lam, params, mc: MonteCarloConfig, kernel_scale: float, focus: ConformalMap | None = None):
    """Per-sample terms ``|S|^2 (f(z)g(e) + g(z)f(e))/2 * K(x) p/q`` in chunk order."""
    n = params.n
    sampler = OffsetSampler(n, lam)
    S = params.sphere_area
    rejected = [0]

    def run(start, size):
        rng = chunk_rng(mc.seed, start // 8192, stream=7)
        zeta, zw = _focused_points(rng, size, n, focus)
        x, w, _ = sampler.sample(rng, size)
        for _ in range(MAX_RESAMPLE):
            close = 0.5 * np.sqrt(qnorm2(np.array([1.0, 0, 0, 0]) - x)) < MIN_PAIR_DISTANCE**2
            if not close.any():
                break
            rejected[0] += int(close.sum())
            x[close], w[close], _ = sampler.sample(rng, int(close.sum()))
        else:
            raise RuntimeError("could not resample degenerate pairs")
        eta = partner_points(zeta, x, rng.standard_normal((size, n + 1, 4)))
        zp, ep = SpherePoint(zeta), SpherePoint(eta)
        fz, ge = f(zp), g(ep)
        if g is f:
            sym = fz * ge
        else:
            sym = 0.5 * (fz * ge + g(zp) * f(ep))
        one_minus = -x
        one_minus[:, 0] += 1.0
        kern = kernel_scale * qnorm2(one_minus) ** (-lam / 4)
        return S * S * sym * kern * w * zw

    parts = chunked_map(run, mc.sample_count)
    return np.concatenate(parts), rejected[0]


def hls_functional_mc(f: SphereFunction, g: SphereFunction, lam: float, params: GroupParams,
                      mc: MonteCarloConfig, focus: ConformalMap | None = None) -> FunctionalEstimate:
    """``iint f(zeta) g(eta) d_S^{-lambda}`` for real ``f, g``.

    ``zeta`` is uniform; the offset ``x = zeta . conj(eta)`` is drawn from
    :class:`OffsetSampler` and reweighted, which keeps the variance finite for
    every ``lambda < Q``.  The estimator is symmetrized in ``f, g``.  A ``focus``
    map sends half of the ``zeta`` samples through it (defensive importance
    sampling for functions concentrated where ``focus`` pushes mass); any map
    gives an unbiased estimate.
    """
    _check_lambda(lam, params)
    terms, rejected = _pair_terms(f, g, lam, params, mc, 2 ** (lam / 2), focus)
    est = MeanEstimate.of(terms)
    bias = _rejected_kernel_mass(lam, params) if rejected else 0.0
    return FunctionalEstimate(est.mean, est.std_error, rejected, bias)


def lp_norm_mc(f: SphereFunction, p: float, params: GroupParams, mc: MonteCarloConfig,
               focus: ConformalMap | None = None) -> tuple[float, float]:
    """``(|S| mean |f|^p)^{1/p}`` with a delta-method standard error."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if focus is None:
        pts = sample_sphere(params, mc.sample_count, mc.seed + 1)
        zw = 1.0
    else:
        zeta, zw = _focused_points(chunk_rng(mc.seed + 1, 0, stream=9), mc.sample_count, params.n, focus)
        pts = SpherePoint(zeta)
    vals = np.abs(np.asarray(f(pts), dtype=float)) ** p * zw
    est = MeanEstimate.of(vals)
    value = (params.sphere_area * est.mean) ** (1 / p)
    se = value * est.std_error / (p * est.mean) if est.mean > 0 else 0.0
    return value, se


def hls_quotient_mc(f: SphereFunction, lam: float, params: GroupParams, mc: MonteCarloConfig,
                    focus: ConformalMap | None = None) -> tuple[float, float]:
    """``I(f,f) / |f|_p^2`` with a first-order combined standard error."""
    p = hls_exponent(lam, params)
    fe = hls_functional_mc(f, f, lam, params, mc, focus)
    nrm, nse = lp_norm_mc(f, p, params, mc, focus)
    q = fe.estimate / nrm**2
    rel = math.hypot(fe.std_error / fe.estimate, 2 * nse / nrm)
    return q, abs(q) * rel


def default_probes(n: int, count: int = 20) -> SpherePoint:
    """Fixed probe set: poles, axis points, points near the south pole, then a
    scrambled-Sobol spread (fixed scramble seed)."""
    fixed = []

    def unit(slot, comp, sign=1.0):
        z = np.zeros((n + 1, 4))
        z[slot, comp] = sign
        return z

    fixed.append(unit(n, 0))
    fixed.append(unit(n, 0, -1.0))
    fixed.append(unit(0, 0))
    fixed.append(unit(0, 0, -1.0))
    for comp in (1, 2):
        z = unit(n, 0, -1.0)
        z[0, comp] = 0.25
        fixed.append(z / np.linalg.norm(z))
    need = max(count - len(fixed), 0)
    if need:
        m = max(int(math.ceil(math.log2(need))), 0)
        sob = qmc.Sobol(d=4 * (n + 1), scramble=True, seed=2024).random_base2(m)[:need]
        g = normal_dist.ppf(np.clip(sob, 1e-12, 1 - 1e-12)).reshape(need, n + 1, 4)
        g /= np.linalg.norm(g.reshape(need, -1), axis=1)[:, None, None]
        fixed.extend(list(g))
    return SpherePoint(np.stack(fixed[:count]))


@dataclass(frozen=True)
class ELResidual:
    residual: float
    ratios: np.ndarray
    std_errors: np.ndarray


def el_residual(h, params: GroupParams, mc: MonteCarloConfig, probes: SpherePoint | None = None,
                lam: float | None = None) -> ELResidual:
    """Max over probes of ``|ratio / median - 1|`` with
    ``ratio(zeta) = int h(eta) |1 - zeta . conj(eta)|^{-lambda/2} deta / h(zeta)^{p-1}``.

    ``h`` is an :class:`ExtremizerSpec` (which fixes ``lambda``) or any positive
    function together with ``lam``.  All probes share the same offset samples.
    """
    if isinstance(h, ExtremizerSpec):
        lam = h.lam if lam is None else lam
    if lam is None:
        raise ValueError("lambda is required for a plain function")
    _check_lambda(lam, params)
    probes = probes if probes is not None else default_probes(params.n)
    if len(probes) == 0:
        raise ValueError("probe set is empty")
    p = hls_exponent(lam, params)
    n = params.n
    sampler = OffsetSampler(n, lam)
    rng = chunk_rng(mc.seed, 0, stream=11)
    x, w, _ = sampler.sample(rng, mc.sample_count)
    gauss = rng.standard_normal((mc.sample_count, n + 1, 4))
    one_minus = -x
    one_minus[:, 0] += 1.0
    kw = qnorm2(one_minus) ** (-lam / 4) * w * params.sphere_area
    ratios, ses = [], []
    for i in range(len(probes)):
        z = probes.zeta[i]
        zeta = np.broadcast_to(z, gauss.shape)
        eta = SpherePoint(partner_points(zeta, x, gauss))
        est = MeanEstimate.of(h(eta) * kw)
        denom = float(h(probes[i : i + 1])[0]) ** (p - 1)
        ratios.append(est.mean / denom)
        ses.append(est.std_error / denom)
    ratios, ses = np.array(ratios), np.array(ses)
    med = float(np.median(ratios))
    return ELResidual(float(np.max(np.abs(ratios / med - 1))), ratios, ses)


def logsob_lhs_rhs_mc(f: SphereFunction, params: GroupParams, mc: MonteCarloConfig):
    """Monte Carlo estimates of both sides of the log-Sobolev inequality for ``f``
    normalized so that ``int f^2 = |S|``.  Returns ``((lhs, se), (rhs, se))``."""
    Q = params.Q
    S = params.sphere_area
    pts = sample_sphere(params, mc.sample_count, mc.seed + 3)
    v = np.asarray(f(pts), dtype=float)
    scale = math.sqrt(S / (S * np.mean(v * v)))

    def fn(z):
        return scale * f(z)

    # lhs kernel d_S^{-Q}: keep |f(z)-f(e)|^2 which vanishes at the diagonal
    n = params.n
    sampler = OffsetSampler(n, Q - 2.0)
    rng = chunk_rng(mc.seed, 0, stream=13)
    x, w, _ = sampler.sample(rng, mc.sample_count)
    zeta = rng.standard_normal((mc.sample_count, n + 1, 4))
    zeta /= np.linalg.norm(zeta.reshape(mc.sample_count, -1), axis=1)[:, None, None]
    eta = partner_points(zeta, x, rng.standard_normal(zeta.shape))
    one_minus = -x
    one_minus[:, 0] += 1.0
    kern = 2 ** (Q / 2) * qnorm2(one_minus) ** (-Q / 4)
    diff = fn(SpherePoint(zeta)) - fn(SpherePoint(eta))
    lhs = MeanEstimate.of(S * S * diff * diff * kern * w)
    u = fn(pts) ** 2
    rhs_terms = S * np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)
    rhs = MeanEstimate.of(rhs_terms)
    return (lhs.mean, lhs.std_error), (rhs.mean, rhs.std_error)
