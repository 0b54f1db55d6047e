"""
Complex polynomials, root finding with multiplicities and the resultant test.
"""

import logging
from dataclasses import dataclass
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from app.core.errors import CommonFactor, RootFindingFailure

logger = logging.getLogger(__name__)

# Split copies of an m-fold root sit about eps**(1/m) apart; four-fold roots stay inside this radius
CLUSTER_RADIUS = 1e-3
# A merged cluster must leave |p| at rounding level at its refined root
MULTIPLE_ROOT_RESIDUAL = 1e-12


@dataclass(frozen=True)
class PolyC:
    """Polynomial with complex coefficients in ascending powers"""

    coeffs: Tuple[complex, ...]

    def __post_init__(self):
        c = [complex(v) for v in self.coeffs]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c) if c else (0j,))

    @classmethod
    def from_coeffs(cls, coeffs: Iterable, rel_tol: float = 0.0) -> "PolyC":
        c = np.asarray(list(coeffs), dtype=complex)
        if c.size and rel_tol > 0:
            scale = np.abs(c).max()
            c = np.where(np.abs(c) <= rel_tol * scale, 0, c)
        return cls(tuple(c))

    @classmethod
    def constant(cls, value: complex) -> "PolyC":
        return cls((value,))

    @classmethod
    def z(cls) -> "PolyC":
        return cls((0, 1))

    @classmethod
    def from_roots(cls, roots: Sequence[complex], leading: complex = 1) -> "PolyC":
        return cls(tuple(leading * P.polyfromroots(roots))) if len(roots) else cls((leading,))

    @property
    def degree(self) -> int:
        return -1 if self.is_zero() else len(self.coeffs) - 1

    @property
    def leading(self) -> complex:
        return self.coeffs[-1]

    def is_zero(self) -> bool:
        return len(self.coeffs) == 1 and self.coeffs[0] == 0

    def as_array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)

    def trimmed(self, rel_tol: float) -> "PolyC":
        return PolyC.from_coeffs(self.coeffs, rel_tol)

    def __call__(self, z):
        return P.polyval(z, self.as_array())

    def __add__(self, other) -> "PolyC":
        return PolyC(tuple(P.polyadd(self.as_array(), _coerce(other).as_array())))

    __radd__ = __add__

    def __sub__(self, other) -> "PolyC":
        return PolyC(tuple(P.polysub(self.as_array(), _coerce(other).as_array())))

    def __rsub__(self, other) -> "PolyC":
        return _coerce(other) - self

    def __neg__(self) -> "PolyC":
        return PolyC(tuple(-self.as_array()))

    def __mul__(self, other) -> "PolyC":
        return PolyC(tuple(P.polymul(self.as_array(), _coerce(other).as_array())))

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "PolyC":
        if n < 0:
            raise ValueError("Negative powers are not polynomials")
        return PolyC(tuple(P.polypow(self.as_array(), n)))

    def divmod(self, other: "PolyC") -> Tuple["PolyC", "PolyC"]:
        q, r = P.polydiv(self.as_array(), other.as_array())
        return PolyC(tuple(q)), PolyC(tuple(r))

    def derivative(self, m: int = 1) -> "PolyC":
        if self.degree < m:
            return PolyC((0,))
        return PolyC(tuple(P.polyder(self.as_array(), m)))

    def integral(self) -> "PolyC":
        """Primitive vanishing at 0"""
        return PolyC(tuple(P.polyint(self.as_array())))

    def scale_norm(self) -> float:
        return float(np.abs(self.as_array()).max())

    def roots(self) -> List[Tuple[complex, int]]:
        return find_roots(self)

    def __str__(self):
        terms = []
        for k, c in enumerate(self.coeffs):
            if c == 0 and len(self.coeffs) > 1:
                continue
            terms.append(f"({c.real!r} + {c.imag!r}*i)*z^{k}" if k else f"({c.real!r} + {c.imag!r}*i)")
        return " + ".join(terms)


def _coerce(value) -> PolyC:
    return value if isinstance(value, PolyC) else PolyC.constant(value)


@dataclass(frozen=True)
class RootOrder:
    root: complex
    order: int
    kind: str  # "zero" or "pole"


def _newton(coeffs: np.ndarray, z: complex, max_iter: int = 60) -> complex:
    d = P.polyder(coeffs) if coeffs.size > 1 else np.zeros(1, dtype=complex)
    for _ in range(max_iter):
        fz = P.polyval(z, coeffs)
        dfz = P.polyval(z, d)
        if dfz == 0:
            break
        step = fz / dfz
        z = z - step
        if abs(step) <= 1e-15 * (1 + abs(z)):
            return z
    # Accept when the residual is at rounding level even without a tiny step
    if abs(P.polyval(z, coeffs)) > 1e-9 * _residual_scale(coeffs, z):
        raise RootFindingFailure("Newton refinement did not converge", root=z)
    return z


def _residual_scale(coeffs: np.ndarray, z: complex) -> float:
    return float(np.abs(coeffs).sum() * max(1.0, abs(z)) ** (coeffs.size - 1))


def _cluster_root(original: np.ndarray, centroid: complex, seed: complex, m: int) -> Tuple[complex, int]:
    """Refine a cluster of m eigenvalues; fall back to a simple root unless p vanishes at the refined point"""
    if m > 1:
        # The root is simple for the (m-1)-th derivative
        try:
            root = _newton(P.polyder(original, m - 1), centroid)
        except RootFindingFailure:
            root = None
        if root is not None:
            if abs(P.polyval(root, original)) <= MULTIPLE_ROOT_RESIDUAL * _residual_scale(original, root):
                return root, m
        logger.debug(f"Cluster of {m} eigenvalues near {centroid} is not a multiple root")
    return _newton(original, seed), 1


def find_roots(p: PolyC) -> List[Tuple[complex, int]]:
    """Roots with multiplicities, smallest first, by cluster detection and deflation"""
    if p.is_zero():
        raise RootFindingFailure("Zero polynomial has no isolated roots")
    original = p.as_array()
    work = original.copy()
    found: List[Tuple[complex, int]] = []
    while work.size > 1:
        estimates = P.polyroots(work)
        if not np.all(np.isfinite(estimates)):
            raise RootFindingFailure("Companion eigenvalues are not finite")
        seed = estimates[np.argmin(np.abs(estimates))]
        cluster = np.abs(estimates - seed) < CLUSTER_RADIUS * (1 + abs(seed))
        centroid = complex(estimates[cluster].mean())
        root, m = _cluster_root(original, centroid, complex(seed), int(cluster.sum()))
        quotient, remainder = P.polydiv(work, P.polyfromroots([root] * m))
        if np.abs(remainder).max(initial=0.0) > 1e-6 * np.abs(work).max():
            raise RootFindingFailure(
                f"Deflation by a root of multiplicity {m} left a large remainder",
                root=root,
                multiplicity=m,
            )
        found.append((root, m))
        work = np.atleast_1d(quotient)
    return found


def sylvester_resultant(p: PolyC, q: PolyC) -> complex:
    """Resultant of the coefficient-normalized polynomials"""
    a = p.as_array()[::-1] / p.scale_norm()
    b = q.as_array()[::-1] / q.scale_norm()
    m, n = a.size - 1, b.size - 1
    if m == 0 or n == 0:
        return complex(a[0] ** n * b[0] ** m)
    size = m + n
    s = np.zeros((size, size), dtype=complex)
    for row in range(n):
        s[row, row : row + m + 1] = a
    for row in range(m):
        s[n + row, row : row + n + 1] = b
    return complex(np.linalg.det(s))


def ensure_coprime(p: PolyC, q: PolyC, coprime_eps: float = 1e-10) -> None:
    res = sylvester_resultant(p, q)
    if abs(res) <= coprime_eps:
        raise CommonFactor(
            f"Polynomials share a factor (|resultant| = {abs(res):.3e})",
            resultant=abs(res),
        )


def _inside(z: complex, rect: Optional[Tuple[float, float, float, float]]) -> bool:
    if rect is None:
        return True
    x_min, x_max, y_min, y_max = rect
    return x_min <= z.real <= x_max and y_min <= z.imag <= y_max


def rational_orders(
    p: PolyC,
    q: PolyC,
    rect: Optional[Tuple[float, float, float, float]] = None,
    coprime_eps: float = 1e-10,
) -> List[RootOrder]:
    """Zeros of p and poles from q, with orders, inside the rectangle"""
    ensure_coprime(p, q, coprime_eps)
    out = [RootOrder(r, m, "zero") for r, m in (p.roots() if p.degree > 0 else []) if _inside(r, rect)]
    out += [RootOrder(r, m, "pole") for r, m in (q.roots() if q.degree > 0 else []) if _inside(r, rect)]
    return sorted(out, key=lambda o: (round(o.root.real, 9), round(o.root.imag, 9), o.kind))


def net_orders(
    p: PolyC,
    q: PolyC,
    rect: Optional[Tuple[float, float, float, float]] = None,
    match_tol: float = 1e-6,
) -> List[Tuple[complex, int]]:
    """Signed orders of p/q after cancelling common roots (zero > 0, pole < 0)"""
    merged: List[List] = []
    for poly, sign in ((p, 1), (q, -1)):
        if poly.degree <= 0:
            continue
        for root, m in poly.roots():
            for entry in merged:
                if abs(entry[0] - root) <= match_tol * (1 + abs(root)):
                    entry[1] += sign * m
                    break
            else:
                merged.append([root, sign * m])
    return [(r, k) for r, k in merged if k != 0 and _inside(r, rect)]
