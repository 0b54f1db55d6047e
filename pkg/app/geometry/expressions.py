"""
Expression trees for meromorphic functions of one complex variable.

Nodes are immutable and hashable. Every node evaluates vectorized over numpy
arrays, differentiates symbolically and prints back into the input grammar.
"""

from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from app.core.errors import PoleProximity
from app.geometry.polynomials import PolyC

Rational = Tuple[PolyC, PolyC]


class _PoleGuard:
    """Collects near-pole denominators seen during one evaluation"""

    def __init__(self, pole_eps: float):
        self.pole_eps = pole_eps
        self.hits: List[complex] = []

    def denominator(self, den: np.ndarray, z: np.ndarray) -> np.ndarray:
        near = np.abs(den) < self.pole_eps
        if np.any(near):
            self.hits.append(complex(np.broadcast_to(z, near.shape)[near].flat[0]))
            den = np.where(near, np.nan, den)
        return den


class AnalyticExpr:
    """Base of all expression nodes"""

    def evaluate(self, z, pole_eps: float = 1e-12, strict: bool = True):
        """
        Evaluate at a scalar or an array of points.

        Strict evaluation raises PoleProximity when a denominator drops below
        pole_eps; otherwise those points come back as NaN.
        """
        zz = np.asarray(z, dtype=complex)
        guard = _PoleGuard(pole_eps)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            value = np.broadcast_to(self._eval(zz, guard), zz.shape).astype(complex)
        if strict and guard.hits:
            raise PoleProximity(
                f"Denominator below {pole_eps:g} near z = {guard.hits[0]}",
                location=guard.hits[0],
                expression=str(self),
            )
        return complex(value) if zz.ndim == 0 else value

    def __call__(self, z):
        return self.evaluate(z)

    def _eval(self, z: np.ndarray, guard: _PoleGuard):
        raise NotImplementedError

    def derivative(self) -> "AnalyticExpr":
        raise NotImplementedError

    def is_constant(self) -> bool:
        return all(child.is_constant() for child in self.children())

    def children(self) -> Tuple["AnalyticExpr", ...]:
        return ()

    def as_rational(self) -> Optional[Rational]:
        """(numerator, denominator) when the tree is rational in z, else None"""
        return None

    def as_polynomial(self) -> Optional[PolyC]:
        rational = self.as_rational()
        if rational is None:
            return None
        num, den = rational
        if den.degree > 0:
            quotient, remainder = num.divmod(den)
            if remainder.scale_norm() > 1e-12 * max(num.scale_norm(), 1.0):
                return None
            return quotient
        return PolyC(tuple(num.as_array() / den.coeffs[0]))

    # Operator sugar, used by the geometry modules to assemble integrands

    def __add__(self, other):
        return add(self, _wrap(other))

    def __radd__(self, other):
        return add(_wrap(other), self)

    def __sub__(self, other):
        return sub(self, _wrap(other))

    def __rsub__(self, other):
        return sub(_wrap(other), self)

    def __mul__(self, other):
        return mul(self, _wrap(other))

    def __rmul__(self, other):
        return mul(_wrap(other), self)

    def __truediv__(self, other):
        return div(self, _wrap(other))

    def __rtruediv__(self, other):
        return div(_wrap(other), self)

    def __neg__(self):
        return neg(self)

    def __pow__(self, n: int):
        return power(self, n)


def _wrap(value) -> AnalyticExpr:
    return value if isinstance(value, AnalyticExpr) else Const(complex(value))


def _format_number(value: complex) -> str:
    if value.imag == 0:
        text = repr(value.real)
        return f"({text})" if value.real < 0 else text
    return f"({value.real!r} + {value.imag!r}*i)"


@dataclass(frozen=True)
class Const(AnalyticExpr):
    value: complex

    def __post_init__(self):
        object.__setattr__(self, "value", complex(self.value))

    def _eval(self, z, guard):
        return np.full(z.shape, self.value, dtype=complex)

    def derivative(self):
        return ZERO

    def is_constant(self):
        return True

    def as_rational(self):
        return PolyC.constant(self.value), PolyC.constant(1)

    def __str__(self):
        return _format_number(self.value)


@dataclass(frozen=True)
class Var(AnalyticExpr):
    def _eval(self, z, guard):
        return z

    def derivative(self):
        return ONE

    def is_constant(self):
        return False

    def as_rational(self):
        return PolyC.z(), PolyC.constant(1)

    def __str__(self):
        return "z"


@dataclass(frozen=True)
class Neg(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)

    def _eval(self, z, guard):
        return -self.arg._eval(z, guard)

    def derivative(self):
        return neg(self.arg.derivative())

    def as_rational(self):
        r = self.arg.as_rational()
        return None if r is None else (-r[0], r[1])

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True)
class Add(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)

    def _eval(self, z, guard):
        return self.left._eval(z, guard) + self.right._eval(z, guard)

    def derivative(self):
        return add(self.left.derivative(), self.right.derivative())

    def as_rational(self):
        a, b = self.left.as_rational(), self.right.as_rational()
        if a is None or b is None:
            return None
        if a[1] == b[1]:
            return a[0] + b[0], a[1]
        return a[0] * b[1] + b[0] * a[1], a[1] * b[1]

    def __str__(self):
        return f"({self.left} + {self.right})"


@dataclass(frozen=True)
class Sub(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)

    def _eval(self, z, guard):
        return self.left._eval(z, guard) - self.right._eval(z, guard)

    def derivative(self):
        return sub(self.left.derivative(), self.right.derivative())

    def as_rational(self):
        a, b = self.left.as_rational(), self.right.as_rational()
        if a is None or b is None:
            return None
        if a[1] == b[1]:
            return a[0] - b[0], a[1]
        return a[0] * b[1] - b[0] * a[1], a[1] * b[1]

    def __str__(self):
        return f"({self.left} - {self.right})"


@dataclass(frozen=True)
class Mul(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)

    def _eval(self, z, guard):
        return self.left._eval(z, guard) * self.right._eval(z, guard)

    def derivative(self):
        return add(
            mul(self.left.derivative(), self.right),
            mul(self.left, self.right.derivative()),
        )

    def as_rational(self):
        a, b = self.left.as_rational(), self.right.as_rational()
        if a is None or b is None:
            return None
        return a[0] * b[0], a[1] * b[1]

    def __str__(self):
        return f"({self.left} * {self.right})"


@dataclass(frozen=True)
class Div(AnalyticExpr):
    left: AnalyticExpr
    right: AnalyticExpr

    def children(self):
        return (self.left, self.right)

    def _eval(self, z, guard):
        num = self.left._eval(z, guard)
        den = guard.denominator(np.broadcast_to(self.right._eval(z, guard), z.shape), z)
        return num / den

    def derivative(self):
        top = sub(
            mul(self.left.derivative(), self.right),
            mul(self.left, self.right.derivative()),
        )
        return div(top, power(self.right, 2))

    def as_rational(self):
        a, b = self.left.as_rational(), self.right.as_rational()
        if a is None or b is None or b[0].is_zero():
            return None
        return a[0] * b[1], a[1] * b[0]

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True)
class Pow(AnalyticExpr):
    base: AnalyticExpr
    exponent: int

    def children(self):
        return (self.base,)

    def _eval(self, z, guard):
        value = self.base._eval(z, guard)
        if self.exponent >= 0:
            return value ** self.exponent
        den = guard.denominator(np.broadcast_to(value, z.shape) ** (-self.exponent), z)
        return 1.0 / den

    def derivative(self):
        n = self.exponent
        if n == 0:
            return ZERO
        return mul(mul(Const(n), power(self.base, n - 1)), self.base.derivative())

    def as_rational(self):
        r = self.base.as_rational()
        if r is None:
            return None
        n = self.exponent
        if n >= 0:
            return r[0] ** n, r[1] ** n
        if r[0].is_zero():
            return None
        return r[1] ** (-n), r[0] ** (-n)

    def __str__(self):
        exp = f"({self.exponent})" if self.exponent < 0 else str(self.exponent)
        return f"({self.base})^{exp}"


@dataclass(frozen=True)
class Exp(AnalyticExpr):
    arg: AnalyticExpr

    def children(self):
        return (self.arg,)

    def _eval(self, z, guard):
        return np.exp(self.arg._eval(z, guard))

    def derivative(self):
        return mul(self, self.arg.derivative())

    def as_rational(self):
        if self.arg.is_constant():
            return PolyC.constant(np.exp(self.arg.evaluate(0))), PolyC.constant(1)
        return None

    def __str__(self):
        return f"exp({self.arg})"


@dataclass(frozen=True)
class Poly(AnalyticExpr):
    """Polynomial given by its coefficients"""

    poly: PolyC

    def _eval(self, z, guard):
        return self.poly(z)

    def derivative(self):
        return Poly(self.poly.derivative())

    def is_constant(self):
        return self.poly.degree <= 0

    def as_rational(self):
        return self.poly, PolyC.constant(1)

    def __str__(self):
        terms = []
        for k, c in enumerate(self.poly.coeffs):
            if c == 0 and self.poly.degree > 0:
                continue
            number = _format_number(c)
            terms.append(number if k == 0 else f"{number}*z^{k}")
        return "(" + " + ".join(terms) + ")"


ZERO = Const(0)
ONE = Const(1)
Z = Var()


def _is_value(e: AnalyticExpr, value: complex) -> bool:
    return isinstance(e, Const) and e.value == value


# Smart constructors fold constants and drop neutral elements


def add(a: AnalyticExpr, b: AnalyticExpr) -> AnalyticExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value + b.value)
    if _is_value(a, 0):
        return b
    if _is_value(b, 0):
        return a
    return Add(a, b)


def sub(a: AnalyticExpr, b: AnalyticExpr) -> AnalyticExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value - b.value)
    if _is_value(b, 0):
        return a
    if _is_value(a, 0):
        return neg(b)
    return Sub(a, b)


def neg(a: AnalyticExpr) -> AnalyticExpr:
    if isinstance(a, Const):
        return Const(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def mul(a: AnalyticExpr, b: AnalyticExpr) -> AnalyticExpr:
    if isinstance(a, Const) and isinstance(b, Const):
        return Const(a.value * b.value)
    if _is_value(a, 0) or _is_value(b, 0):
        return ZERO
    if _is_value(a, 1):
        return b
    if _is_value(b, 1):
        return a
    return Mul(a, b)


def div(a: AnalyticExpr, b: AnalyticExpr) -> AnalyticExpr:
    if isinstance(a, Const) and isinstance(b, Const) and b.value != 0:
        return Const(a.value / b.value)
    if _is_value(a, 0):
        return ZERO
    if _is_value(b, 1):
        return a
    return Div(a, b)


def power(a: AnalyticExpr, n: int) -> AnalyticExpr:
    if n == 0:
        return ONE
    if n == 1:
        return a
    if isinstance(a, Const) and (n > 0 or a.value != 0):
        return Const(a.value ** n)
    return Pow(a, n)


def exp(a: AnalyticExpr) -> AnalyticExpr:
    return Exp(a)


def polynomial(p: PolyC) -> AnalyticExpr:
    return Const(p.coeffs[0]) if p.degree <= 0 else Poly(p)
