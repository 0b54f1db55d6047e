"""
Exact classification on rational data: finite total curvature normal form,
completeness screening for epsilon = +1 and parallel mean curvature detection.
"""

import cmath
import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from app.core.config import Settings, get_settings
from app.core.errors import InvalidData
from app.geometry.polynomials import PolyC, ensure_coprime
from app.geometry.weierstrass import FField, WeierstrassData, f_is_constant

logger = logging.getLogger(__name__)

G_CONSTANT_EPS = 1e-12


@dataclass(frozen=True)
class RationalData:
    """g = P1/P2, omega = W dz, with the constants of the data"""

    P1: PolyC
    P2: PolyC
    W: PolyC
    eps: int
    a: float = 0.0
    b: float = 0.0
    c: complex = 0j
    coprime_eps: float = 1e-10

    def __post_init__(self):
        if self.eps not in (-1, 1):
            raise InvalidData(f"epsilon must be -1 or +1, got {self.eps}")
        if self.W.is_zero():
            raise InvalidData("omega vanishes identically")
        if self.P2.is_zero():
            raise InvalidData("The denominator of g vanishes identically")
        ensure_coprime(self.P1, self.P2, self.coprime_eps)

    @property
    def k(self) -> float:
        """a + eps b"""
        return self.a + self.eps * self.b

    @classmethod
    def from_weierstrass(cls, data: WeierstrassData, coprime_eps: float = 1e-10) -> "RationalData":
        g = data.g.as_rational()
        W = data.w.as_polynomial()
        if g is None or W is None:
            raise InvalidData("Classification needs rational g and polynomial omega")
        P1, P2 = g
        return cls(P1, P2, W, data.eps, data.a, data.b, data.c, coprime_eps)


class RejectReason(str, Enum):
    CONSTANT_G = "constant_g"
    POSITIVE_EPSILON = "positive_epsilon"
    OMEGA_FORM = "omega_form"
    DEGREE_OBSTRUCTION = "degree_obstruction"


@dataclass(frozen=True)
class MobiusNormalization:
    tau: complex
    gamma: complex
    beta: float = 0.0

    @property
    def applied(self) -> bool:
        return not (self.tau == 1 and self.gamma == 0 and self.beta == 0)


IDENTITY = MobiusNormalization(1 + 0j, 0j)


@dataclass(frozen=True)
class FTCVerdict:
    admissible: bool
    reason: Optional[RejectReason] = None
    cause: Optional[str] = None
    normalization: MobiusNormalization = IDENTITY
    A: Optional[complex] = None
    f_degree: Optional[int] = None
    omega_dg_degree: Optional[int] = None

    @property
    def label(self) -> str:
        return "AdmissibleFTC" if self.admissible else f"Reject({self.reason.value})"


def mobius_transform(rd: RationalData, tau: complex, gamma: complex, beta: float = 0.0, rel_tol: float = 1e-10) -> RationalData:
    """
    g -> (tau g + eps conj(gamma)) / (gamma g + conj(tau)),
    omega -> e^{i beta} (gamma g + conj(tau))^2 omega, with |tau|^2 - eps|gamma|^2 = 1.

    The constants follow so that c + (a + eps b) g + eps conj(c) g^2 times omega,
    and with it df, is unchanged up to the phase; b is kept.
    """
    eps = rd.eps
    tau, gamma = complex(tau), complex(gamma)
    det = abs(tau) ** 2 - eps * abs(gamma) ** 2
    if abs(det - 1) > 1e-9:
        raise InvalidData(f"|tau|^2 - eps|gamma|^2 must be 1, got {det}")
    P1 = (tau * rd.P1 + eps * gamma.conjugate() * rd.P2).trimmed(rel_tol)
    P2 = (gamma * rd.P1 + tau.conjugate() * rd.P2).trimmed(rel_tol)
    quotient, remainder = (P2**2 * rd.W).divmod(rd.P2**2)
    if remainder.scale_norm() > rel_tol * max(1.0, quotient.scale_norm()):
        raise InvalidData("The transformed omega is not polynomial")
    W = (cmath.exp(1j * beta) * quotient).trimmed(rel_tol)

    c, k = rd.c, rd.k
    c_new = c * tau**2 - k * eps * gamma.conjugate() * tau + eps * c.conjugate() * gamma.conjugate() ** 2
    k_new = k * (abs(tau) ** 2 + eps * abs(gamma) ** 2) - 4 * (c * tau * gamma).real
    return RationalData(P1, P2, W, eps, float(k_new) - eps * rd.b, rd.b, complex(c_new), rd.coprime_eps)


def _normalize_infinity(rd: RationalData) -> MobiusNormalization:
    """Rotation of the sphere taking the value of g at infinity to infinity (eps = -1)"""
    if rd.P1.degree > rd.P2.degree:
        return IDENTITY
    v = rd.P1.leading / rd.P2.leading if rd.P1.degree == rd.P2.degree else 0j
    gamma = 1 / math.sqrt(1 + abs(v) ** 2)
    return MobiusNormalization(-v.conjugate() * gamma, complex(gamma))


def ftc_classify(rd: RationalData, tol_division: float = 1e-10) -> FTCVerdict:
    """
    Decide whether rational data can carry a complete non-flat surface of finite
    total curvature: g = P1/P2, omega = A P2^2 dz and c = a + eps b = 0.
    """
    if rd.P1.degree <= 0 and rd.P2.degree <= 0:
        return FTCVerdict(False, RejectReason.CONSTANT_G)
    if rd.eps == 1:
        return FTCVerdict(False, RejectReason.POSITIVE_EPSILON)

    quotient, remainder = rd.W.divmod(rd.P2**2)
    if remainder.scale_norm() > tol_division * rd.W.scale_norm() or quotient.trimmed(tol_division).degree != 0:
        return FTCVerdict(False, RejectReason.OMEGA_FORM)
    A = complex(quotient.coeffs[0])

    root = cmath.sqrt(A)
    scaled = RationalData(root * rd.P1, root * rd.P2, rd.W, rd.eps, rd.a, rd.b, rd.c, rd.coprime_eps)
    normalization = _normalize_infinity(scaled)
    if normalization.applied:
        logger.info(f"Normalizing g(inf) = inf with tau = {normalization.tau:.6g}, gamma = {normalization.gamma:.6g}")
        scaled = mobius_transform(scaled, normalization.tau, normalization.gamma, rel_tol=tol_division)

    P1, P2, eps = scaled.P1, scaled.P2, scaled.eps
    df = (scaled.c * P2**2 + scaled.k * P1 * P2 + eps * scaled.c.conjugate() * P1**2).trimmed(tol_division)
    omega_dg = (P1.derivative() * P2 - P1 * P2.derivative()).trimmed(tol_division)
    scale = max(1.0, P1.scale_norm(), P2.scale_norm()) ** 2
    f_degree = 0 if df.scale_norm() <= tol_division * scale else df.degree + 1

    if f_degree > 0:
        cause = "c" if abs(rd.c) > tol_division else "a+eps*b"
        logger.info(f"Degree obstruction: deg f = {f_degree} > deg(omega dg) = {omega_dg.degree}")
        return FTCVerdict(
            False, RejectReason.DEGREE_OBSTRUCTION, cause, normalization, A, f_degree, omega_dg.degree
        )
    return FTCVerdict(True, None, None, normalization, A, 0, omega_dg.degree)


class ScreenKind(str, Enum):
    NONE = "none"
    COMPLETENESS_WARNING = "completeness_warning"
    DEGENERATE_FLAT = "degenerate_flat"


@dataclass(frozen=True)
class ScreenVerdict:
    kind: ScreenKind
    constructible: bool
    message: str = ""


def _g_variation(data: WeierstrassData) -> float:
    if data.g.is_constant():
        return 0.0
    values = data.grid.sample(lambda z: data.g.evaluate(z, strict=False))
    finite = values[np.isfinite(values)]
    return float(np.abs(finite - finite[0]).max()) if finite.size else 0.0


def completeness_screen(data: WeierstrassData, assert_complete: bool = False) -> ScreenVerdict:
    """
    Constant g gives a flat surface in a degenerate hyperplane and is refused.
    For eps = +1 a complete example is necessarily flat, so non-flat data only
    gets an advisory note; completeness itself is never decided here.
    """
    if _g_variation(data) < G_CONSTANT_EPS:
        return ScreenVerdict(
            ScreenKind.DEGENERATE_FLAT,
            False,
            "g is constant: the surface is flat and lies in a degenerate hyperplane",
        )
    if data.eps == 1:
        message = "Non-flat data with eps = +1 cannot produce a complete surface"
        if assert_complete:
            message += "; the asserted completeness is impossible"
        logger.warning(message)
        return ScreenVerdict(ScreenKind.COMPLETENESS_WARNING, True, message)
    return ScreenVerdict(ScreenKind.NONE, True)


class ParallelKind(str, Enum):
    ZERO_MEAN_CURVATURE = "zero_mean_curvature_affine"
    HYPERQUADRIC = "affine_hyperquadric"
    NON_PARALLEL = "non_parallel"


@dataclass(frozen=True)
class ParallelVerdict:
    kind: ParallelKind
    hyperquadric: Optional[str] = None

    @property
    def parallel(self) -> bool:
        return self.kind != ParallelKind.NON_PARALLEL


def parallel_H_classify(f: FField, data: WeierstrassData, settings: Optional[Settings] = None) -> ParallelVerdict:
    """H is parallel exactly when f is constant"""
    settings = settings or get_settings()
    if not f_is_constant(f, data.f0, settings.tolerances.f_const_eps):
        return ParallelVerdict(ParallelKind.NON_PARALLEL)
    if data.a == 0 and data.b == 0 and data.c == 0:
        space = "R3" if data.eps == -1 else "L3"
        return ParallelVerdict(ParallelKind.ZERO_MEAN_CURVATURE, space)
    return ParallelVerdict(ParallelKind.HYPERQUADRIC, "H3" if data.eps == -1 else "S3_1")
