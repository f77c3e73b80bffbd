"""Quaternion algebra on plain numpy arrays.

A quaternion ``z = z0 + z1 i + z2 j + z3 k`` is stored as an array whose last
axis has length 4, ordered ``(1, i, j, k)`` with Hamilton's table
``ij = k, jk = i, ki = j``.  Every function broadcasts over leading axes, so a
stack of ``n`` quaternions is simply an ``(n, 4)`` array.

Purely imaginary quaternions are identified with 3-vectors; ``to_vector`` and
``from_vector`` convert between the two.
"""

from __future__ import annotations

import numpy as np

from .errors import PreconditionError

ONE = np.array([1.0, 0.0, 0.0, 0.0])
I = np.array([0.0, 1.0, 0.0, 0.0])
J = np.array([0.0, 0.0, 1.0, 0.0])
K = np.array([0.0, 0.0, 0.0, 1.0])

UNIT_TOL = 1e-12


def quaternion(z0=0.0, z1=0.0, z2=0.0, z3=0.0) -> np.ndarray:
    return np.array([z0, z1, z2, z3], dtype=float)


def from_vector(v) -> np.ndarray:
    """Embed 3-vectors as purely imaginary quaternions (real part exactly 0)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (4,))
    out[..., 1:] = v
    return out


def to_vector(q) -> np.ndarray:
    """Imaginary part of ``q`` as a 3-vector."""
    return np.asarray(q, dtype=float)[..., 1:].copy()


def real(q):
    return np.asarray(q, dtype=float)[..., 0]


def conj(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return q * np.array([1.0, -1.0, -1.0, -1.0])


def norm(q):
    return np.linalg.norm(np.asarray(q, dtype=float), axis=-1)


def qmul(a, b) -> np.ndarray:
    """Hamilton product ``a b``.

    Equivalent to ``Re a Re b - Im a . Im b + Re a Im b + Re b Im a + Im a x Im b``.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    b0, b1, b2, b3 = np.moveaxis(b, -1, 0)
    return np.stack(
        [
            a0 * b0 - a1 * b1 - a2 * b2 - a3 * b3,
            a0 * b1 + a1 * b0 + a2 * b3 - a3 * b2,
            a0 * b2 - a1 * b3 + a2 * b0 + a3 * b1,
            a0 * b3 + a1 * b2 - a2 * b1 + a3 * b0,
        ],
        axis=-1,
    )


def inverse(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    return conj(q) / np.sum(q * q, axis=-1, keepdims=True)


def inner(a, b):
    """Euclidean inner product on R^4 (equals ``Re(conj(a) b)``)."""
    return np.sum(np.asarray(a, dtype=float) * np.asarray(b, dtype=float), axis=-1)


def exp_i(theta) -> np.ndarray:
    """The unit quaternion ``cos(theta) + i sin(theta)``."""
    theta = np.asarray(theta, dtype=float)
    out = np.zeros(theta.shape + (4,))
    out[..., 0] = np.cos(theta)
    out[..., 1] = np.sin(theta)
    return out


def rotate(rho, v) -> np.ndarray:
    """Rotate the 3-vector ``v`` by the unit quaternion ``rho``: ``conj(rho) v rho``.

    ``rho`` is not normalized here; a non-unit rotor raises
    :class:`PreconditionError`.  With Hamilton's table this turns ``v`` by
    ``-theta`` about ``Im rho`` when ``rho = cos(theta/2) + sin(theta/2) n``.
    ``rho`` and ``-rho`` give the same result.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(norm(rho) - 1.0) > UNIT_TOL):
        raise PreconditionError("rotate() needs a unit quaternion")
    out = qmul(qmul(conj(rho), from_vector(v)), rho)
    return out[..., 1:]


def hopf(z) -> np.ndarray:
    """Hopf map ``z -> conj(z) i z`` returned as a 3-vector.

    Written out, for ``z = (a, b, c, d)`` this is
    ``(a^2 + b^2 - c^2 - d^2, 2(bc - ad), 2(ac + bd))``.
    """
    z = np.asarray(z, dtype=float)
    a, b, c, d = np.moveaxis(z, -1, 0)
    return np.stack(
        [a * a + b * b - c * c - d * d, 2.0 * (b * c - a * d), 2.0 * (a * c + b * d)],
        axis=-1,
    )


def hopf_jacobian(z) -> np.ndarray:
    """Jacobian ``d hopf / dz`` with shape ``(..., 3, 4)``."""
    z = np.asarray(z, dtype=float)
    a, b, c, d = np.moveaxis(z, -1, 0)
    rows = [
        np.stack([a, b, -c, -d], axis=-1),
        np.stack([-d, c, b, -a], axis=-1),
        np.stack([c, d, a, b], axis=-1),
    ]
    return 2.0 * np.stack(rows, axis=-2)


def hopf_section(v) -> np.ndarray:
    """A deterministic preimage of the 3-vector ``v`` under :func:`hopf`.

    Writing ``z = alpha + beta j`` with complex ``alpha, beta``, the fiber is
    ``e^{i theta} z``.  The representative returned has ``alpha`` real and
    non-negative (so ``Re z`` is maximal on the fiber and ``z1 = 0``); when
    ``alpha`` vanishes, ``beta`` is taken real and positive.
    """
    v = np.asarray(v, dtype=float)
    x, y, w = np.moveaxis(v, -1, 0)
    r = np.sqrt(x * x + y * y + w * w)
    # |alpha|^2 = (r + x)/2, |beta|^2 = (r - x)/2; take the larger root directly
    # and recover the other from |alpha||beta| = sqrt(y^2 + w^2)/2.
    alpha_big = x >= 0
    rho = np.sqrt(np.maximum(y * y + w * w, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        a_direct = np.sqrt(np.maximum((r + x) / 2.0, 0.0))
        b_direct = np.sqrt(np.maximum((r - x) / 2.0, 0.0))
        a = np.where(alpha_big, a_direct, np.where(b_direct > 0, rho / (2.0 * b_direct), 0.0))
        c = np.where(a > 0, w / (2.0 * a), b_direct)
        d = np.where(a > 0, -y / (2.0 * a), 0.0)
    return np.stack([a, np.zeros_like(a), c, d], axis=-1)
