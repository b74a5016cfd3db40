"""Quaternion algebra in its 2x2 complex and 4x4 real matrix forms.

A quaternion ``q = q0 + q1 i + q2 j + q3 k`` is stored by its four real
components. The complex view uses ``z1 = q0 + i q3`` and ``z2 = q2 + i q1``
and the 2x2 matrix ``[[z1, -conj(z2)], [z2, conj(z1)]]``, under which the
units read ``i = sqrt(-1) sigma_1``, ``j = -sqrt(-1) sigma_2`` and
``k = sqrt(-1) sigma_3``. Vectors of R^4 are laid out as ``(x0, x3, x2, x1)``
throughout the package, which makes left multiplication by ``a`` the matrix
``[[A1, -A2^T], [A2, A1^T]]`` with ``A1 = [[a0, -a3], [a3, a0]]`` and
``A2 = [[a2, -a1], [a1, a2]]``.

The ``*_array`` helpers operate on stacks of shape ``(..., 4)`` and are
what the dataclass methods call into.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .errors import DomainError

__all__ = [
    "Quaternion",
    "DihedralSimilitude",
    "qmul",
    "qconj",
    "qinv",
    "to_matrix4",
    "polar_decompose",
    "realize",
    "qmul_array",
    "qconj_array",
    "qinv_array",
    "matrix2_array",
    "from_matrix2_array",
    "matrix4_array",
    "vec_array",
    "from_vec_array",
    "polar_array",
    "similitude_array",
    "rotation",
]

TWO_PI = 2.0 * np.pi


# -- stacked (..., 4) arrays --------------------------------------------------


def qmul_array(a: ArrayLike, b: ArrayLike) -> NDArray[np.float64]:
    """Hamilton product of two stacks of quaternions."""
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


def qconj_array(a: ArrayLike) -> NDArray[np.float64]:
    out = np.array(a, dtype=float, copy=True)
    out[..., 1:] *= -1.0
    return out


def qinv_array(a: ArrayLike) -> NDArray[np.float64]:
    a = np.asarray(a, dtype=float)
    n2 = np.sum(a * a, axis=-1)
    if np.any(n2 == 0.0):
        raise DomainError("non-invertible: zero quaternion")
    return qconj_array(a) / n2[..., None]


def matrix2_array(a: ArrayLike) -> NDArray[np.complex128]:
    """2x2 complex views ``[[z1, -conj z2], [z2, conj z1]]``."""
    a = np.asarray(a, dtype=float)
    z1 = a[..., 0] + 1j * a[..., 3]
    z2 = a[..., 2] + 1j * a[..., 1]
    out = np.empty(a.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = z1
    out[..., 0, 1] = -np.conj(z2)
    out[..., 1, 0] = z2
    out[..., 1, 1] = np.conj(z1)
    return out


def from_matrix2_array(m: ArrayLike) -> NDArray[np.float64]:
    """Read quaternions back from their 2x2 views (first column is authoritative)."""
    m = np.asarray(m, dtype=complex)
    z1 = m[..., 0, 0]
    z2 = m[..., 1, 0]
    return np.stack([z1.real, z2.imag, z2.real, z1.imag], axis=-1)


def vec_array(a: ArrayLike) -> NDArray[np.float64]:
    """Reorder ``(q0, q1, q2, q3)`` into the R^4 layout ``(x0, x3, x2, x1)``."""
    return np.asarray(a, dtype=float)[..., [0, 3, 2, 1]]


def from_vec_array(x: ArrayLike) -> NDArray[np.float64]:
    return np.asarray(x, dtype=float)[..., [0, 3, 2, 1]]


def matrix4_array(a: ArrayLike) -> NDArray[np.float64]:
    """Matrices of left multiplication acting on ``(x0, x3, x2, x1)``."""
    a = np.asarray(a, dtype=float)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    rows = [
        [a0, -a3, -a2, -a1],
        [a3, a0, a1, -a2],
        [a2, -a1, a0, a3],
        [a1, a2, -a3, a0],
    ]
    return np.stack([np.stack(r, axis=-1) for r in rows], axis=-2)


def _canonical_angle(theta: NDArray, radius: NDArray) -> NDArray:
    theta = np.mod(theta, TWO_PI)
    # mod can round a tiny negative angle up to exactly 2 pi
    theta = np.where(theta >= TWO_PI, 0.0, theta)
    return np.where(radius == 0.0, 0.0, theta)


def polar_array(a: ArrayLike) -> NDArray[np.float64]:
    """Rotation-dilation parameters ``(lambda1, theta1, lambda2, theta2)``.

    Angles are full-quadrant and reduced to ``[0, 2 pi)``; an angle whose
    dilation vanishes is set to 0.
    """
    a = np.asarray(a, dtype=float)
    a0, a1, a2, a3 = np.moveaxis(a, -1, 0)
    lam1 = np.hypot(a0, a3)
    lam2 = np.hypot(a1, a2)
    if np.any((lam1 == 0.0) & (lam2 == 0.0)):
        raise DomainError("zero quaternion has no rotation-dilation form")
    th1 = _canonical_angle(np.arctan2(a3, a0), lam1)
    th2 = _canonical_angle(np.arctan2(a1, a2), lam2)
    return np.stack([lam1, th1, lam2, th2], axis=-1)


def rotation(theta: ArrayLike) -> NDArray[np.float64]:
    """Counter-clockwise rotation matrices ``[[cos, -sin], [sin, cos]]``."""
    theta = np.asarray(theta, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)


def similitude_array(lam1, theta1, lam2, theta2) -> NDArray[np.float64]:
    """Block matrices ``[[l1 R(t1), -l2 R(-t2)], [l2 R(t2), l1 R(-t1)]]``."""
    lam1, theta1, lam2, theta2 = np.broadcast_arrays(
        *(np.asarray(v, dtype=float) for v in (lam1, theta1, lam2, theta2))
    )
    out = np.empty(lam1.shape + (4, 4))
    l1 = lam1[..., None, None]
    l2 = lam2[..., None, None]
    out[..., :2, :2] = l1 * rotation(theta1)
    out[..., :2, 2:] = -l2 * rotation(-theta2)
    out[..., 2:, :2] = l2 * rotation(theta2)
    out[..., 2:, 2:] = l1 * rotation(-theta1)
    return out


# -- scalar API ---------------------------------------------------------------


@dataclass(frozen=True)
class Quaternion:
    """A quaternion ``q0 + q1 i + q2 j + q3 k`` with real components."""

    q0: float = 0.0
    q1: float = 0.0
    q2: float = 0.0
    q3: float = 0.0

    def __post_init__(self):
        for name in ("q0", "q1", "q2", "q3"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_array(cls, a: ArrayLike) -> Quaternion:
        a = np.asarray(a, dtype=float)
        return cls(a[0], a[1], a[2], a[3])

    @classmethod
    def from_complex(cls, z1: complex, z2: complex) -> Quaternion:
        return cls(z1.real, z2.imag, z2.real, z1.imag)

    @classmethod
    def from_matrix(cls, m: ArrayLike) -> Quaternion:
        return cls.from_array(from_matrix2_array(m))

    @classmethod
    def from_vec(cls, x: ArrayLike) -> Quaternion:
        return cls.from_array(from_vec_array(x))

    @property
    def z1(self) -> complex:
        return complex(self.q0, self.q3)

    @property
    def z2(self) -> complex:
        return complex(self.q2, self.q1)

    def to_array(self) -> NDArray[np.float64]:
        return np.array([self.q0, self.q1, self.q2, self.q3])

    def matrix(self) -> NDArray[np.complex128]:
        return matrix2_array(self.to_array())

    def vec(self) -> NDArray[np.float64]:
        return vec_array(self.to_array())

    def norm2(self) -> float:
        return self.q0**2 + self.q1**2 + self.q2**2 + self.q3**2

    def norm(self) -> float:
        return float(np.sqrt(self.norm2()))

    def conj(self) -> Quaternion:
        return Quaternion(self.q0, -self.q1, -self.q2, -self.q3)

    def inv(self) -> Quaternion:
        return qinv(self)

    def __mul__(self, other):
        if isinstance(other, Quaternion):
            return qmul(self, other)
        if np.isscalar(other) and np.isrealobj(other):
            return Quaternion.from_array(self.to_array() * other)
        return NotImplemented

    def __rmul__(self, other):
        if np.isscalar(other) and np.isrealobj(other):
            return Quaternion.from_array(self.to_array() * other)
        return NotImplemented

    def __add__(self, other: Quaternion) -> Quaternion:
        return Quaternion.from_array(self.to_array() + other.to_array())

    def __sub__(self, other: Quaternion) -> Quaternion:
        return Quaternion.from_array(self.to_array() - other.to_array())

    def __neg__(self) -> Quaternion:
        return Quaternion.from_array(-self.to_array())


ONE = Quaternion(1.0)
I = Quaternion(0.0, 1.0)
J = Quaternion(0.0, 0.0, 1.0)
K = Quaternion(0.0, 0.0, 0.0, 1.0)


def qmul(a: Quaternion, b: Quaternion) -> Quaternion:
    return Quaternion.from_array(qmul_array(a.to_array(), b.to_array()))


def qconj(a: Quaternion) -> Quaternion:
    return a.conj()


def qinv(a: Quaternion) -> Quaternion:
    """Inverse ``conj(a) / |a|^2``; raises DomainError for the zero quaternion."""
    return Quaternion.from_array(qinv_array(a.to_array()))


def to_matrix4(a: Quaternion) -> NDArray[np.float64]:
    return matrix4_array(a.to_array())


@dataclass(frozen=True)
class DihedralSimilitude:
    """Two rotation-dilation pairs assembled into one 4x4 matrix.

    The realized matrix is
    ``[[lambda1 R(theta1), -lambda2 R(-theta2)], [lambda2 R(theta2), lambda1 R(-theta1)]]``,
    a multiple ``sqrt(lambda1^2 + lambda2^2)`` of an orthogonal matrix.
    """

    lambda1: float
    theta1: float
    lambda2: float
    theta2: float

    def __post_init__(self):
        for name in ("lambda1", "theta1", "lambda2", "theta2"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise DomainError("dilations must be nonnegative")
        if self.lambda1**2 + self.lambda2**2 <= 0:
            raise DomainError("lambda1^2 + lambda2^2 must be positive")

    @property
    def scale2(self) -> float:
        """``lambda1^2 + lambda2^2``, the squared modulus of the quaternion."""
        return self.lambda1**2 + self.lambda2**2

    @property
    def det(self) -> float:
        return self.scale2**2

    def matrix(self) -> NDArray[np.float64]:
        return realize(self)

    def inverse(self) -> NDArray[np.float64]:
        """Closed-form inverse; equals the transpose divided by ``scale2``."""
        l1, l2 = self.lambda1, self.lambda2
        out = np.empty((4, 4))
        out[:2, :2] = l1 * rotation(-self.theta1)
        out[:2, 2:] = l2 * rotation(-self.theta2)
        out[2:, :2] = -l2 * rotation(self.theta2)
        out[2:, 2:] = l1 * rotation(self.theta1)
        return out / self.scale2

    def quaternion(self) -> Quaternion:
        """The quaternion whose left action this matrix is."""
        return Quaternion(
            self.lambda1 * np.cos(self.theta1),
            self.lambda2 * np.sin(self.theta2),
            self.lambda2 * np.cos(self.theta2),
            self.lambda1 * np.sin(self.theta1),
        )


def polar_decompose(a: Quaternion) -> DihedralSimilitude:
    return DihedralSimilitude(*polar_array(a.to_array()))


def realize(d: DihedralSimilitude) -> NDArray[np.float64]:
    return similitude_array(d.lambda1, d.theta1, d.lambda2, d.theta2)
