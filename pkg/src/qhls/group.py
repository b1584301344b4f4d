"""The quaternionic Heisenberg group ``G = H^n x Im H``.

Points are :class:`GroupPoint` values holding ``q`` with shape ``(..., n, 4)``
and the imaginary coordinate ``w`` with shape ``(..., 3)``; leading axes are
batch axes, so one ``GroupPoint`` may carry many samples.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .quaternion import DimensionError, imag_quat, qabs, qdot, qim, vnorm2


@dataclass(frozen=True)
class GroupParams:
    n: int

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")

    @property
    def Q(self) -> int:
        """Homogeneous dimension."""
        return 4 * self.n + 6

    @property
    def sphere_area(self) -> float:
        """Surface area of the quaternionic sphere ``S^{4n+3}``."""
        return 2.0 * math.pi ** (2 * self.n + 2) / math.factorial(2 * self.n + 1)

    @property
    def real_dim(self) -> int:
        """Real dimension of the ambient space ``H^{n+1}``."""
        return 4 * self.n + 4


@dataclass(frozen=True)
class GroupPoint:
    q: np.ndarray
    w: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if q.ndim < 2 or q.shape[-1] != 4:
            raise ValueError(f"q must have shape (..., n, 4), got {q.shape}")
        if w.shape[-1:] != (3,):
            raise ValueError(f"w must have shape (..., 3), got {w.shape}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "w", w)

    @property
    def n(self) -> int:
        return self.q.shape[-2]

    @classmethod
    def identity(cls, n: int) -> "GroupPoint":
        return cls(np.zeros((n, 4)), np.zeros(3))

    def __getitem__(self, idx) -> "GroupPoint":
        return GroupPoint(self.q[idx], self.w[idx])


def _check_same_n(u: GroupPoint, v: GroupPoint) -> None:
    if u.n != v.n:
        raise DimensionError(f"group points of dimension {u.n} and {v.n}")


def random_group_points(n: int, count: int, rng: np.random.Generator, scale: float = 1.0) -> GroupPoint:
    return GroupPoint(scale * rng.standard_normal((count, n, 4)), scale**2 * rng.standard_normal((count, 3)))


def group_mul(u: GroupPoint, v: GroupPoint) -> GroupPoint:
    """``(q, w)(q', w') = (q + q', w + w' + 2 Im q.conj(q'))``."""
    _check_same_n(u, v)
    return GroupPoint(u.q + v.q, u.w + v.w + 2.0 * qim(qdot(u.q, v.q)))


def group_inv(u: GroupPoint) -> GroupPoint:
    return GroupPoint(-u.q, -u.w)


def hom_norm(u: GroupPoint) -> np.ndarray:
    """Homogeneous norm ``(|q|^4 + |w|^2)^{1/4}``."""
    return (vnorm2(u.q) ** 2 + np.sum(u.w * u.w, axis=-1)) ** 0.25


def dilate(delta: float, u: GroupPoint) -> GroupPoint:
    if not delta > 0:
        raise ValueError(f"dilation factor must be positive, got {delta}")
    return GroupPoint(delta * u.q, delta**2 * u.w)


def dist_g(u: GroupPoint, v: GroupPoint) -> np.ndarray:
    """Left-invariant distance ``|v^{-1} u|`` in closed form."""
    _check_same_n(u, v)
    dq = u.q - v.q
    dw = u.w - v.w + 2.0 * qim(qdot(u.q, v.q))
    return (vnorm2(dq) ** 2 + np.sum(dw * dw, axis=-1)) ** 0.25


def extremizer_g(u: GroupPoint, q0, r0, lam: float) -> np.ndarray:
    """Group extremizer ``| |q|^2 + w - 2 q0.conj(q) + r0 |^{-(2Q - lam)/2}``.

    ``q0`` is a quaternion vector of length ``n`` and ``r0`` a quaternion with
    ``Re r0 > |q0|^2``.
    """
    q0 = np.asarray(q0, dtype=float)
    r0 = np.asarray(r0, dtype=float)
    Q = 4 * u.n + 6
    if not 0 < lam < Q:
        raise ValueError(f"lambda must lie in (0, {Q}), got {lam}")
    if q0.shape != (u.n, 4):
        raise DimensionError(f"q0 must have shape ({u.n}, 4), got {q0.shape}")
    if not r0[0] > float(vnorm2(q0)):
        raise ValueError("need Re r0 > |q0|^2")
    z = imag_quat(u.w) - 2.0 * qdot(q0, u.q) + r0
    z = z + np.stack([vnorm2(u.q)] + [np.zeros_like(vnorm2(u.q))] * 3, axis=-1)
    return qabs(z) ** (-(2 * Q - lam) / 2.0)


def group_extremizer_params(delta: float, u0: GroupPoint) -> tuple[np.ndarray, np.ndarray]:
    """``(q0, r0)`` such that ``H(delta (u0^{-1} u))`` is proportional to
    :func:`extremizer_g` with these parameters."""
    r0 = np.array([1.0 / delta**2 + float(vnorm2(u0.q)), 0.0, 0.0, 0.0]) - imag_quat(u0.w)
    return u0.q.copy(), r0


def standard_bubble(u: GroupPoint, lam: float) -> np.ndarray:
    """``H(u) = ((1 + |q|^2)^2 + |w|^2)^{-(2Q - lam)/4}``."""
    Q = 4 * u.n + 6
    return ((1.0 + vnorm2(u.q)) ** 2 + np.sum(u.w * u.w, axis=-1)) ** (-(2 * Q - lam) / 4.0)


