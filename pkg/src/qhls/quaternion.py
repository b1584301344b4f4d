"""Quaternion and quaternion-vector algebra on numpy arrays.

A quaternion ``a + bi + cj + dk`` is stored as the last axis of length 4,
``[a, b, c, d]``.  A vector in ``H^n`` is an array of shape ``(..., n, 4)``.
All functions broadcast over leading axes and never mutate their inputs.
"""
from __future__ import annotations

import numpy as np

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])


class DimensionError(ValueError):
    """Operands live in quaternion spaces of different dimension."""


def quat(a=0.0, b=0.0, c=0.0, d=0.0) -> np.ndarray:
    return np.array([a, b, c, d], dtype=float)


def _as_quat(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.ndim == 0 or q.shape[-1] != 4:
        raise DimensionError(f"quaternion arrays need a trailing axis of length 4, got {q.shape}")
    return q


def qmul(p, q) -> np.ndarray:
    """Hamilton product ``p q``."""
    p = _as_quat(p)
    q = _as_quat(q)
    a, b, c, d = np.moveaxis(p, -1, 0)
    a2, b2, c2, d2 = np.moveaxis(q, -1, 0)
    return np.stack(
        [
            a * a2 - b * b2 - c * c2 - d * d2,
            a * b2 + a2 * b + c * d2 - d * c2,
            a * c2 + a2 * c + d * b2 - b * d2,
            a * d2 + a2 * d + b * c2 - c * b2,
        ],
        axis=-1,
    )


def qconj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def qnorm2(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return np.sum(q * q, axis=-1)


def qabs(q) -> np.ndarray:
    return np.sqrt(qnorm2(q))


def qinv(q) -> np.ndarray:
    n2 = qnorm2(q)
    if np.any(n2 == 0):
        raise ZeroDivisionError("zero quaternion has no inverse")
    return qconj(q) / n2[..., None]


def qre(q) -> np.ndarray:
    return np.asarray(q, dtype=float)[..., 0]


def qim(q) -> np.ndarray:
    """Imaginary part as the 3-vector of i, j, k coefficients."""
    return np.asarray(q, dtype=float)[..., 1:]


def imag_quat(w) -> np.ndarray:
    """Embed a 3-vector ``(w1, w2, w3)`` as the quaternion ``w1 i + w2 j + w3 k``."""
    w = np.asarray(w, dtype=float)
    return np.concatenate([np.zeros(w.shape[:-1] + (1,)), w], axis=-1)


def left_div(q, denom) -> np.ndarray:
    """Left quotient ``q / denom = denom^{-1} q``."""
    return qmul(qinv(denom), q)


def qdot(u, v) -> np.ndarray:
    """Quaternionic scalar product ``u . conj(v) = sum_j u_j conj(v_j)``.

    ``u`` and ``v`` have shape ``(..., n, 4)``.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape[-2] != v.shape[-2]:
        raise DimensionError(f"length mismatch: {u.shape[-2]} vs {v.shape[-2]}")
    return np.sum(qmul(u, qconj(v)), axis=-2)


def vnorm2(u) -> np.ndarray:
    """``|u|^2`` for a quaternion vector of shape ``(..., n, 4)``."""
    u = np.asarray(u, dtype=float)
    return np.sum(u * u, axis=(-2, -1))


def complex_pair(q) -> tuple[np.ndarray, np.ndarray]:
    """Split ``q = z1 + z2 j`` with ``z1 = a + bi`` and ``z2 = c + di``."""
    q = np.asarray(q, dtype=float)
    return q[..., 0] + 1j * q[..., 1], q[..., 2] + 1j * q[..., 3]


def from_complex_pair(z1, z2) -> np.ndarray:
    z1 = np.asarray(z1, dtype=complex)
    z2 = np.asarray(z2, dtype=complex)
    return np.stack([z1.real, z1.imag, z2.real, z2.imag], axis=-1)


def complex_pair_mul(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Product of ``(z1, z2)`` and ``(w1, w2)`` in the complex-pair picture."""
    z1, z2 = x
    w1, w2 = y
    return z1 * w1 - z2 * np.conj(w2), z1 * w2 + z2 * np.conj(w1)


def complex_matrix(q) -> np.ndarray:
    """The 2x2 complex matrix representing ``q``; multiplicative in ``q``."""
    z1, z2 = complex_pair(q)
    row0 = np.stack([z1, z2], axis=-1)
    row1 = np.stack([-np.conj(z2), np.conj(z1)], axis=-1)
    return np.stack([row0, row1], axis=-2)
