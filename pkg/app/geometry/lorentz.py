"""
Hermitian matrix model of Minkowski 4-space and the SL(2,C) action.

A point (x0, x1, x2, x3) with metric -dx0^2 + dx1^2 + dx2^2 + dx3^2 is the matrix

    [[x0 + x3, x1 + i x2],
     [x1 - i x2, x0 - x3]]

and <m, m> = -det m. The scalar value types are immutable; the array helpers at
the bottom work on stacks of shape (..., 2, 2) and are what the grid code uses.
"""

from dataclasses import dataclass

import numpy as np

from app.core.errors import InvalidData


@dataclass(frozen=True)
class SpacetimeVec:
    x0: float
    x1: float
    x2: float
    x3: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x0, self.x1, self.x2, self.x3], dtype=float)

    @classmethod
    def from_array(cls, values) -> "SpacetimeVec":
        x0, x1, x2, x3 = (float(v) for v in values)
        return cls(x0, x1, x2, x3)


@dataclass(frozen=True)
class HermPoint:
    """2x2 Hermitian matrix; h21 is derived so the constraint holds exactly"""

    h11: float
    h12: complex
    h22: float

    def __post_init__(self):
        object.__setattr__(self, "h11", float(self.h11))
        object.__setattr__(self, "h12", complex(self.h12))
        object.__setattr__(self, "h22", float(self.h22))

    @property
    def h21(self) -> complex:
        return self.h12.conjugate()

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.h11, self.h12], [self.h21, self.h22]], dtype=complex)

    def det(self) -> float:
        return self.h11 * self.h22 - abs(self.h12) ** 2

    @classmethod
    def from_matrix(cls, m, atol: float = 1e-12) -> "HermPoint":
        m = np.asarray(m, dtype=complex)
        scale = max(1.0, float(np.abs(m).max()))
        if np.abs(m - m.conj().T).max() > atol * scale:
            raise InvalidData("Matrix is not Hermitian", matrix=m.tolist())
        return cls(m[0, 0].real, m[0, 1], m[1, 1].real)


@dataclass(frozen=True)
class SL2C:
    m11: complex
    m12: complex
    m21: complex
    m22: complex
    tol_det: float = 1e-9

    def __post_init__(self):
        if abs(self.det() - 1) > self.tol_det:
            raise InvalidData(f"SL(2,C) element has det {self.det()}", det=self.det())

    def det(self) -> complex:
        return self.m11 * self.m22 - self.m12 * self.m21

    def as_matrix(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def inverse(self) -> "SL2C":
        return SL2C(self.m22, -self.m12, -self.m21, self.m11, self.tol_det)

    @classmethod
    def from_matrix(cls, m, tol_det: float = 1e-9) -> "SL2C":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], tol_det)

    @classmethod
    def identity(cls) -> "SL2C":
        return cls(1, 0, 0, 1)


def to_herm(v: SpacetimeVec) -> HermPoint:
    return HermPoint(v.x0 + v.x3, complex(v.x1, v.x2), v.x0 - v.x3)


def from_herm(m: HermPoint) -> SpacetimeVec:
    return SpacetimeVec(
        (m.h11 + m.h22) / 2, m.h12.real, m.h12.imag, (m.h11 - m.h22) / 2
    )


def minkowski_inner(m: HermPoint, n: HermPoint) -> float:
    """Polarized determinant: -(det(m+n) - det m - det n)/2"""
    s = HermPoint(m.h11 + n.h11, m.h12 + n.h12, m.h22 + n.h22)
    return -(s.det() - m.det() - n.det()) / 2


def sl2_act(phi: SL2C, m: HermPoint) -> HermPoint:
    p = phi.as_matrix()
    prod = p @ m.as_matrix() @ p.conj().T
    return HermPoint(prod[0, 0].real, (prod[0, 1] + prod[1, 0].conjugate()) / 2, prod[1, 1].real)


# Array helpers over stacks of shape (..., 2, 2)


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def det2(m: np.ndarray) -> np.ndarray:
    return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


def inv2(m: np.ndarray) -> np.ndarray:
    """Adjugate over determinant, for stacks of 2x2 matrices"""
    d = det2(m)
    out = np.empty_like(m)
    out[..., 0, 0] = m[..., 1, 1]
    out[..., 0, 1] = -m[..., 0, 1]
    out[..., 1, 0] = -m[..., 1, 0]
    out[..., 1, 1] = m[..., 0, 0]
    return out / d[..., None, None]


def bilinear(m: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Complex-bilinear extension of the Minkowski product to 2x2 matrices"""
    return -0.5 * (
        m[..., 0, 0] * n[..., 1, 1]
        + m[..., 1, 1] * n[..., 0, 0]
        - m[..., 0, 1] * n[..., 1, 0]
        - m[..., 1, 0] * n[..., 0, 1]
    )


def to_components(m: np.ndarray) -> np.ndarray:
    """Complex-linear coordinates (x0, x1, x2, x3) of a stack of 2x2 matrices"""
    return np.stack(
        [
            (m[..., 0, 0] + m[..., 1, 1]) / 2,
            (m[..., 0, 1] + m[..., 1, 0]) / 2,
            (m[..., 0, 1] - m[..., 1, 0]) / 2j,
            (m[..., 0, 0] - m[..., 1, 1]) / 2,
        ],
        axis=-1,
    )


def from_components(x: np.ndarray) -> np.ndarray:
    """Inverse of to_components; real input gives Hermitian output"""
    x = np.asarray(x)
    out = np.empty(x.shape[:-1] + (2, 2), dtype=complex)
    out[..., 0, 0] = x[..., 0] + x[..., 3]
    out[..., 0, 1] = x[..., 1] + 1j * x[..., 2]
    out[..., 1, 0] = x[..., 1] - 1j * x[..., 2]
    out[..., 1, 1] = x[..., 0] - x[..., 3]
    return out


def euclid_norm2(m: np.ndarray) -> np.ndarray:
    """Squared Euclidean norm of the (possibly complex) coordinates"""
    return np.sum(np.abs(to_components(m)) ** 2, axis=-1)


def minkowski_metric() -> np.ndarray:
    return np.diag([-1.0, 1.0, 1.0, 1.0])
