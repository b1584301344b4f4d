"""Geometry of the quaternionic sphere ``S`` in ``H^{n+1}``.

Sphere points are arrays of shape ``(..., n+1, 4)`` wrapped in
:class:`SpherePoint`.  The last quaternion slot is ``zeta_{n+1}``; the north
pole is ``(0, ..., 0, 1)`` and the Cayley transform misses the south pole.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .group import GroupParams, GroupPoint, dilate
from .quaternion import imag_quat, qabs, qdot, qim, qinv, qmul, qnorm2, vnorm2

SINGULAR_TOL = 1e-12


class SingularityError(ArithmeticError):
    """Evaluation at an excluded point (south pole or antipodal configuration)."""


@dataclass(frozen=True)
class SpherePoint:
    """Point(s) of ``S``; renormalized on construction."""

    zeta: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.zeta, dtype=float)
        if z.ndim < 2 or z.shape[-1] != 4:
            raise ValueError(f"zeta must have shape (..., n+1, 4), got {z.shape}")
        nrm = np.sqrt(vnorm2(z))
        if np.any(nrm == 0):
            raise ValueError("cannot normalize the zero vector")
        object.__setattr__(self, "zeta", z / nrm[..., None, None])

    @property
    def n(self) -> int:
        return self.zeta.shape[-2] - 1

    @property
    def last(self) -> np.ndarray:
        """The quaternion ``zeta_{n+1}``."""
        return self.zeta[..., -1, :]

    @property
    def flat(self) -> np.ndarray:
        """Real coordinates in ``R^{4n+4}``."""
        return self.zeta.reshape(self.zeta.shape[:-2] + (-1,))

    def __len__(self):
        return self.zeta.shape[0]

    def __getitem__(self, idx) -> "SpherePoint":
        return SpherePoint(self.zeta[idx])

    @classmethod
    def pole(cls, n: int, sign: float = 1.0) -> "SpherePoint":
        z = np.zeros((n + 1, 4))
        z[-1, 0] = sign
        return cls(z)

    @classmethod
    def axis(cls, n: int, slot: int, component: int = 0, sign: float = 1.0) -> "SpherePoint":
        z = np.zeros((n + 1, 4))
        z[slot, component] = sign
        return cls(z)


def _zeta(z) -> np.ndarray:
    return z.zeta if isinstance(z, SpherePoint) else np.asarray(z, dtype=float)


# -- Cayley transform ---------------------------------------------------------


def cayley(u: GroupPoint) -> SpherePoint:
    """Boundary Cayley transform ``G -> S \\ {south pole}``."""
    r2 = vnorm2(u.q)
    den = imag_quat(-u.w)
    den[..., 0] += 1.0 + r2
    num = imag_quat(u.w)
    num[..., 0] += 1.0 - r2
    inv = qinv(den)
    head = qmul(inv[..., None, :], 2.0 * u.q)
    last = qmul(inv, num)
    return SpherePoint(np.concatenate([head, last[..., None, :]], axis=-2))


def cayley_inv(z) -> GroupPoint:
    """Inverse Cayley transform; raises at the south pole."""
    zeta = _zeta(z)
    last = zeta[..., -1, :]
    one_plus = last.copy()
    one_plus[..., 0] += 1.0
    if np.any(qabs(one_plus) <= SINGULAR_TOL):
        raise SingularityError("inverse Cayley transform is undefined at the south pole")
    one_minus = -last
    one_minus[..., 0] += 1.0
    inv = qinv(one_plus)
    return GroupPoint(qmul(inv[..., None, :], zeta[..., :-1, :]), -qim(qmul(inv, one_minus)))


def jac_cayley(u: GroupPoint) -> np.ndarray:
    """``|J_C(u)| = 2^{Q-3} ((1+|q|^2)^2 + |w|^2)^{-Q/2}``."""
    Q = 4 * u.n + 6
    return 2.0 ** (Q - 3) * ((1.0 + vnorm2(u.q)) ** 2 + np.sum(u.w * u.w, axis=-1)) ** (-Q / 2.0)


def jac_cayley_sphere(z) -> np.ndarray:
    """The same Jacobian written on the sphere side, ``2^{-3} |1 + zeta_{n+1}|^Q``."""
    zeta = _zeta(z)
    Q = 4 * (zeta.shape[-2] - 1) + 6
    one_plus = zeta[..., -1, :].copy()
    one_plus[..., 0] += 1.0
    return 0.125 * qabs(one_plus) ** Q


# -- distances ----------------------------------------------------------------


def dist_s(z, w) -> np.ndarray:
    """``d_S = 2^{-1/2} |1 - zeta . conj(eta)|^{1/2}``."""
    x = -qdot(_zeta(z), _zeta(w))
    x[..., 0] += 1.0
    return np.sqrt(np.sqrt(0.5 * qnorm2(x)) * math.sqrt(0.5))


def dist_s_complex(z, w) -> np.ndarray:
    """``d_S`` through complex coordinates:
    ``2^{-1/2} (|1 - zeta ._C conj(eta)|^2 + |zeta ._C sigma(eta)|^2)^{1/4}``."""
    a, b = _zeta(z), _zeta(w)
    z1, z2 = a[..., 0] + 1j * a[..., 1], a[..., 2] + 1j * a[..., 3]
    e1, e2 = b[..., 0] + 1j * b[..., 1], b[..., 2] + 1j * b[..., 3]
    herm = np.sum(z1 * np.conj(e1) + z2 * np.conj(e2), axis=-1)
    # sigma(eta) = (-eta^2, eta^1), paired bilinearly
    skew = np.sum(-z1 * e2 + z2 * e1, axis=-1)
    return 2.0**-0.5 * (np.abs(1.0 - herm) ** 2 + np.abs(skew) ** 2) ** 0.25


# -- sampling and polar coordinates ------------------------------------------


def sample_sphere(params: GroupParams, count: int, seed: int, antithetic: bool = False) -> SpherePoint:
    """Uniform samples on ``S^{4n+3}`` from normalized Gaussian vectors.

    With ``antithetic=True`` the second half of the batch is the negation of the
    first (``count`` must be even); each sample is still uniformly distributed.
    """
    if count <= 0:
        raise ValueError("count must be positive")
    from .montecarlo import gaussian_block

    if antithetic:
        if count % 2:
            raise ValueError("antithetic sampling needs an even count")
        g = gaussian_block(seed, count // 2, (params.n + 1, 4))
        g = np.concatenate([g, -g], axis=0)
    else:
        g = gaussian_block(seed, count, (params.n + 1, 4))
    return SpherePoint(g)


@dataclass(frozen=True)
class PolarAngles:
    """Polar coordinates: ``theta`` has ``n`` entries in ``[0, pi/2]``; ``phi`` has
    shape ``(n+1, 3)`` holding ``(phi3, phi2, phi1)`` per quaternion slot."""

    theta: np.ndarray
    phi: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        ph = np.asarray(self.phi, dtype=float)
        if ph.shape[-1] != 3 or ph.shape[-2] != th.shape[-1] + 1:
            raise ValueError("phi must have shape (..., n+1, 3) for theta of shape (..., n)")
        object.__setattr__(self, "theta", th)
        object.__setattr__(self, "phi", ph)

    def check_range(self) -> None:
        th, ph = self.theta, self.phi
        bad = (
            np.any((th < 0) | (th > math.pi / 2))
            or np.any((ph[..., :2] < 0) | (ph[..., :2] > math.pi))
            or np.any((ph[..., 2] < 0) | (ph[..., 2] > 2 * math.pi))
        )
        if bad:
            raise ValueError("polar angle out of range")

    def to_sphere(self) -> SpherePoint:
        th, ph = self.theta, self.phi
        n = th.shape[-1]
        p3, p2, p1 = ph[..., 0], ph[..., 1], ph[..., 2]
        u = np.stack(
            [np.cos(p3), np.sin(p3) * np.cos(p2), np.sin(p3) * np.sin(p2) * np.cos(p1),
             np.sin(p3) * np.sin(p2) * np.sin(p1)],
            axis=-1,
        )
        radii = []
        for i in range(n + 1):
            # eta_{i+1} = u_{i+1} sin(theta_n) ... sin(theta_{i+1}) cos(theta_i)
            r = np.prod(np.sin(th[..., i:]), axis=-1) if i < n else np.ones(th.shape[:-1])
            if i >= 1:
                r = r * np.cos(th[..., i - 1])
            radii.append(r)
        rad = np.stack(radii, axis=-1)
        return SpherePoint(u * rad[..., None])


def polar_weight(angles: PolarAngles, params: GroupParams | None = None) -> np.ndarray:
    """Density of the surface measure in the flat angle measure:
    ``prod_i sin^{4i-1}(theta_i) cos^3(theta_i) * prod_j sin^2(phi3_j) sin(phi2_j)``."""
    angles.check_range()
    if params is not None and params.n != angles.theta.shape[-1]:
        raise ValueError("angles do not match params.n")
    th, ph = angles.theta, angles.phi
    n = th.shape[-1]
    i = np.arange(1, n + 1)
    w = np.prod(np.sin(th) ** (4 * i - 1) * np.cos(th) ** 3, axis=-1)
    w = w * np.prod(np.sin(ph[..., 0]) ** 2 * np.sin(ph[..., 1]), axis=-1)
    return w


# -- conformal maps -----------------------------------------------------------


@dataclass(frozen=True)
class ConformalMap:
    """``gamma^delta_xi``: conjugate of the group dilation by ``delta`` through the
    Cayley transform, recentred so that ``xi`` plays the role of the north pole."""

    delta: float
    xi: SpherePoint

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError(f"delta must be a positive real, got {self.delta}")
        if not isinstance(self.xi, SpherePoint):
            object.__setattr__(self, "xi", SpherePoint(self.xi))

    @property
    def n(self) -> int:
        return self.xi.n

    def inverse(self) -> "ConformalMap":
        return ConformalMap(1.0 / self.delta, self.xi)

    @classmethod
    def identity(cls, n: int) -> "ConformalMap":
        return cls(1.0, SpherePoint.pole(n))


def _gamma_denominator(m: ConformalMap, zeta: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    s = qdot(zeta, m.xi.zeta)
    d2 = m.delta**2
    den = (1.0 - d2) * s
    den[..., 0] += 1.0 + d2
    return s, den


def conformal_gamma(m: ConformalMap, z) -> SpherePoint:
    """Explicit form of ``gamma^delta_xi``; scalars act from the left."""
    zeta = _zeta(z)
    s, den = _gamma_denominator(m, zeta)
    if np.any(qabs(den) <= SINGULAR_TOL):
        raise SingularityError("conformal map evaluated at its singular point")
    d2 = m.delta**2
    inv = qinv(den)
    xi = m.xi.zeta
    tangential = zeta - qmul(s[..., None, :], xi)
    along = (1.0 + d2) * s
    along[..., 0] += 1.0 - d2
    head = qmul((2.0 * m.delta * inv)[..., None, :], tangential)
    tail = qmul(qmul(inv, along)[..., None, :], xi)
    return SpherePoint(head + tail)


def conformal_jacobian(m: ConformalMap, z) -> np.ndarray:
    """``|J_gamma(zeta)| = (2 delta / |1 + s + delta^2 (1 - s)|)^Q`` with
    ``s = zeta . conj(xi)``."""
    zeta = _zeta(z)
    _, den = _gamma_denominator(m, zeta)
    a = qabs(den)
    if np.any(a <= SINGULAR_TOL):
        raise SingularityError("conformal map evaluated at its singular point")
    Q = 4 * m.n + 6
    return (2.0 * m.delta / a) ** Q


def sp_frame(xi: SpherePoint, rng: np.random.Generator | None = None) -> np.ndarray:
    """Rows ``u_1, ..., u_{n+1}`` orthonormal for ``u . conj(v)`` with ``u_{n+1} = xi``.

    ``A zeta = (zeta . conj(u_i))_i`` is then a quaternionic unitary map with
    ``A xi = e_{n+1}``.
    """
    rng = rng or np.random.default_rng(0)
    n = xi.n
    rows = [xi.zeta]
    while len(rows) < n + 1:
        v = rng.standard_normal((n + 1, 4))
        for r in rows:
            v = v - qmul(qdot(v, r)[None, :], r)
        nv = math.sqrt(float(vnorm2(v)))
        if nv > 1e-6:
            rows.append(v / nv)
    return np.stack(rows[1:] + rows[:1])


def apply_frame(frame: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    """Coordinates of ``zeta`` in ``frame``: ``(zeta . conj(u_i))_i``."""
    return np.stack([qdot(zeta, frame[i]) for i in range(frame.shape[0])], axis=-2)


def unapply_frame(frame: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Inverse of :func:`apply_frame`: ``sum_i c_i u_i``."""
    return np.sum(qmul(coords[..., :, None, :], frame[None, :, :, :] if coords.ndim > 2 else frame), axis=-3)


def conformal_gamma_composite(m: ConformalMap, z, frame: np.ndarray | None = None) -> SpherePoint:
    """``A^* C S_delta C^{-1} A`` with an explicit rotation ``A``; slow path for tests."""
    zeta = _zeta(z)
    frame = sp_frame(m.xi) if frame is None else frame
    a_zeta = apply_frame(frame, zeta)
    image = cayley(dilate(m.delta, cayley_inv(a_zeta))).zeta
    return SpherePoint(unapply_frame(frame, image))


def center_mass(points: SpherePoint, weights) -> np.ndarray:
    """Weighted mean of the points as a vector in ``R^{4n+4}``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    total = float(np.sum(w))
    if total <= 0:
        raise ValueError("all weights are zero")
    return np.tensordot(w, points.flat, axes=(0, 0)) / total


# -- recentering ----------------------------------------------------------------


class ConvergenceFailure(RuntimeError):
    """Iterative solver stopped without meeting its tolerance; carries the best iterate."""

    def __init__(self, message: str, best=None, residual: float = math.inf):
        super().__init__(message)
        self.best = best
        self.residual = residual


def map_from_ball(b: np.ndarray, n: int) -> ConformalMap:
    """``b = r xi`` with ``|b| < 1`` to ``gamma^{1-r}_xi`` (identity at ``b = 0``)."""
    b = np.asarray(b, dtype=float).reshape(n + 1, 4)
    r = math.sqrt(float(np.sum(b * b)))
    if r == 0.0:
        return ConformalMap.identity(n)
    if r >= 1.0:
        raise ValueError("ball parameter must satisfy |b| < 1")
    return ConformalMap(1.0 - r, SpherePoint(b / r))


@dataclass
class RecenterResult:
    map: ConformalMap
    center: np.ndarray
    residual: float
    iterations: int
    sample_count: int


def pushed_center(density_values: np.ndarray, points: SpherePoint, m: ConformalMap) -> np.ndarray:
    """Center of mass of the density pushed forward by ``m``:
    ``int gamma(zeta) f(zeta) dzeta / int f``, by change of variables."""
    return center_mass(conformal_gamma(m, points), density_values)


def recenter(density, params: GroupParams, mc=None, max_iter: int = 200) -> RecenterResult:
    """Find ``gamma^{1-r}_xi`` whose push-forward of ``density`` has zero center of mass.

    Uses a fixed antithetic uniform sample (common random numbers) so the
    residual is a deterministic function of ``b = r xi``.  Each outer step
    points ``xi`` against the current center and bisects on ``r`` along that
    ray; a Newton-type polish (``scipy.optimize.root``) finishes.  On stall the
    sample is quadrupled.
    """
    from scipy import optimize

    from .montecarlo import MonteCarloConfig

    mc = mc or MonteCarloConfig(sample_count=1 << 16)
    n = params.n
    count = mc.sample_count + (mc.sample_count % 2)
    best = (math.inf, np.zeros((n + 1) * 4))
    it = 0
    for _attempt in range(3):
        pts = sample_sphere(params, count, mc.seed, antithetic=True)
        vals = np.asarray(density(pts), dtype=float)
        if np.any(vals < 0):
            raise ValueError("density must be nonnegative")

        def resid(bvec):
            r = float(np.linalg.norm(bvec))
            if r >= 1.0:
                bvec = bvec * (0.999999 / r)
            return pushed_center(vals, pts, map_from_ball(bvec, n))

        b = np.zeros((n + 1) * 4)
        c = resid(b)
        for _ in range(max_iter):
            it += 1
            nc = float(np.linalg.norm(c))
            if nc < best[0]:
                best = (nc, b.copy())
            if nc <= mc.tolerance:
                break
            direction = -c / nc
            # bisection on r along the ray: g(r) = <F(r d), d> goes from -|c| (r=0) towards +1 (r=1)
            lo, hi = 0.0, 1.0 - 1e-9
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                if float(resid(mid * direction) @ direction) < 0:
                    lo = mid
                else:
                    hi = mid
            b_ray = 0.5 * (lo + hi) * direction
            c_ray = resid(b_ray)
            if np.linalg.norm(c_ray) >= nc * (1 - 1e-12):
                break
            b, c = b_ray, c_ray
        sol = optimize.root(resid, best[1], method="hybr", options={"xtol": 1e-12})
        c_sol = resid(sol.x)
        if np.linalg.norm(c_sol) < best[0] and np.linalg.norm(sol.x) < 1:
            best = (float(np.linalg.norm(c_sol)), sol.x.copy())
        if best[0] <= mc.tolerance:
            m = map_from_ball(best[1], n)
            return RecenterResult(m, resid(best[1]), best[0], it, count)
        count *= 4
    raise ConvergenceFailure(
        f"recentering stalled with |center| = {best[0]:.3g}", best=map_from_ball(best[1], n), residual=best[0]
    )
