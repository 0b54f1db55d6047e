"""
Classical special cases with independent constructions: the Weierstrass
representation, CMC surfaces through null curves, the analytic deformation
towards r = 0 and the c = 0 families.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import Settings, get_settings
from app.core.errors import FVanishes, GNotZeroAtBase, InvalidData
from app.geometry.expressions import AnalyticExpr
from app.geometry.frames import ConnectionMatrix, build_frame_field, integrate_F
from app.geometry.grid import (
    DomainGrid,
    GridCalculus,
    finite_max,
    holomorphic_derivative,
    path_primitive,
    substep_rule,
    transport,
)
from app.geometry.lorentz import bilinear, dagger, det2, euclid_norm2, from_components, to_components
from app.geometry.verifiers import CheckResult
from app.geometry.weierstrass import FField, WeierstrassData, derive

logger = logging.getLogger(__name__)


class LimitKind(str, Enum):
    MINIMAL_R3 = "minimal_R3"
    MAXIMAL_L3 = "maximal_L3"
    CMC_H3 = "cmc_H3"
    CMC_S3 = "cmc_S3"


@dataclass(frozen=True)
class LimitCase:
    kind: LimitKind
    r: Optional[float] = None


def detect_limit_case(eps: int, a: float, b: float, c: complex, f0: complex = 1) -> Optional[LimitCase]:
    """Recognize the classical cases from the constants"""
    if a == 0 and b == 0 and c == 0:
        return LimitCase(LimitKind.MINIMAL_R3 if eps == -1 else LimitKind.MAXIMAL_L3)
    if c == 0 and a > 0 and a + eps * b == 0 and f0 == 1:
        return LimitCase(LimitKind.CMC_H3 if eps == -1 else LimitKind.CMC_S3, float(a))
    return None


def cmc_omega(g: np.ndarray, eps: int, r: float) -> np.ndarray:
    """(1/r) [[-eps, eps conj(g)], [eps g, 1 - eps|g|^2]]"""
    g = np.asarray(g, dtype=complex)
    out = np.empty(g.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = -eps
    out[..., 0, 1] = eps * np.conj(g)
    out[..., 1, 0] = eps * g
    out[..., 1, 1] = 1 - eps * np.abs(g) ** 2
    return out / r


@dataclass(frozen=True, eq=False)
class ClosedForm:
    components: np.ndarray  # (nx, ny, 4) real
    psi: np.ndarray


def weierstrass_closed_form(
    g: AnalyticExpr,
    w: AnalyticExpr,
    eps: int,
    grid: DomainGrid,
    base: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
    g0: complex = 0,
    f0: complex = 1,
) -> ClosedForm:
    """
    psi = Phi + Phi* for the a = b = c = 0 data normalized by F(z0) = I, where

        Phi = [[eps conj(f0) G1,                  W - eps conj(g0) G1],
               [eps conj(f0)/f0 (G2 - g0 G1),     (G1 - g0 W - eps conj(g0) (G2 - g0 G1)) / f0]]

    and W, G1, G2 are the primitives of omega, g omega and g^2 omega from z0.
    With g0 = 0 and f0 = 1 the coordinates are
    Re of the integral of ((1+eps) g, 1 + eps g^2, -i(1 - eps g^2), -(1-eps) g) omega.
    """
    settings = settings or get_settings()
    tol = settings.tolerances
    if f0 == 0:
        raise InvalidData("The closed form needs f0 != 0")

    def primitive(expr: AnalyticExpr) -> np.ndarray:
        return path_primitive(lambda z: expr.evaluate(z, tol.pole_eps), grid, tol.tol_loop).values

    W = primitive(w)
    G1 = primitive(g * w)
    G2 = primitive(g**2 * w)
    g0, f0 = complex(g0), complex(f0)
    Phi = np.empty(grid.shape + (2, 2), dtype=complex)
    Phi[..., 0, 0] = eps * f0.conjugate() * G1
    Phi[..., 0, 1] = W - eps * g0.conjugate() * G1
    Phi[..., 1, 0] = eps * (f0.conjugate() / f0) * (G2 - g0 * G1)
    Phi[..., 1, 1] = ((G1 - g0 * W) - eps * g0.conjugate() * (G2 - g0 * G1)) / f0
    x = to_components(Phi + dagger(Phi)).real
    if base is not None:
        x = x + np.asarray(base, dtype=float)
    return ClosedForm(x, from_components(x))


def procrustes_residual(X: np.ndarray, Y: np.ndarray, base_index: Tuple[int, int]) -> Tuple[float, np.ndarray]:
    """
    Max nodewise distance after translating both base nodes to the origin and
    rotating the spatial part of X onto Y (reflections allowed).
    """
    i0, j0 = base_index
    Xs = X - X[i0, j0]
    Ys = Y - Y[i0, j0]
    valid = np.all(np.isfinite(Xs), axis=-1) & np.all(np.isfinite(Ys), axis=-1)
    P, Q = Xs[valid][:, 1:], Ys[valid][:, 1:]
    U, _, Vt = np.linalg.svd(P.T @ Q)
    rotation = U @ Vt
    spatial = np.sum((P @ rotation - Q) ** 2, axis=1)
    time = (Xs[valid][:, 0] - Ys[valid][:, 0]) ** 2
    return float(np.sqrt(spatial + time).max()), rotation


@dataclass(frozen=True, eq=False)
class BryantCurve:
    B: np.ndarray
    psi: np.ndarray
    checks: List[CheckResult]


def bryant_null_curve(
    g: AnalyticExpr,
    w: AnalyticExpr,
    eps: int,
    r: float,
    grid: DomainGrid,
    settings: Optional[Settings] = None,
) -> BryantCurve:
    """
    B = F [[0, i], [i, -i g]] for the data a = r, b = -eps r, c = 0, f = 1,
    and psi = (1/r) B diag(1, -eps) B*.
    """
    settings = settings or get_settings()
    tol = settings.tolerances
    if r <= 0:
        raise InvalidData(f"r must be positive, got {r}")
    derived = derive(WeierstrassData(g, w, eps, grid, a=r, b=-eps * r, c=0, f0=1), settings)
    grid = derived.grid
    g0 = g.evaluate(grid.base_node, tol.pole_eps)
    frame = build_frame_field(derived, settings, base=cmc_omega(g0, eps, r))
    g_values = derived.data.on_grid(g, tol.pole_eps)

    K = np.zeros(grid.shape + (2, 2), dtype=complex)
    K[..., 0, 1] = 1j
    K[..., 1, 0] = 1j
    K[..., 1, 1] = -1j * g_values
    B = frame.F @ K
    psi_B = (B @ np.diag([1.0, -eps]).astype(complex) @ dagger(B)) / r

    dB = holomorphic_derivative(B, grid, settings.fd_order)
    size = np.sum(np.abs(dB) ** 2, axis=(-1, -2))
    nullity = np.where(size > 0, np.abs(det2(dB)) / size, np.nan)
    hyperquadric = np.abs(-det2(frame.psi).real - eps / r**2) * r**2
    agreement = np.sqrt(euclid_norm2(psi_B - frame.psi))
    omega = np.abs(frame.Omega - cmc_omega(g_values, eps, r)).max(axis=(-1, -2))

    checks = [
        CheckResult("null_curve_det", finite_max(np.abs(det2(B) - 1), "det B"), tol.tol_det),
        CheckResult("null_curve_nullity", finite_max(nullity, "det dB"), tol.tol_null),
        CheckResult("hyperquadric", finite_max(hyperquadric, "hyperquadric"), tol.tol_geo),
        CheckResult("null_curve_vs_pipeline", finite_max(agreement, "null curve agreement"), tol.tol_oracle),
        CheckResult("omega_cmc", finite_max(omega, "Omega"), tol.tol_oracle),
    ]
    return BryantCurve(B, psi_B, checks)


def neville_at_zero(r_values: Sequence[float], samples: Sequence[np.ndarray]) -> np.ndarray:
    """Value at r = 0 of the interpolating polynomial through (r_k, samples_k)"""
    r = list(r_values)
    table = [np.array(s, copy=True) for s in samples]
    n = len(r)
    for k in range(1, n):
        for i in range(n - k):
            table[i] = (-r[i + k] * table[i] + r[i] * table[i + 1]) / (r[i] - r[i + k])
    return table[0]


@dataclass(frozen=True, eq=False)
class DeformationFamily:
    r_values: Tuple[float, ...]
    X: Tuple[np.ndarray, ...]  # (nx, ny, 4) real per r
    X0: np.ndarray
    sup_difference: Tuple[float, ...]
    slope: float
    checks: List[CheckResult]

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(r, d, self.slope) for r, d in zip(self.r_values, self.sup_difference)]


def _translated_immersion(
    g: AnalyticExpr, w: AnalyticExpr, eps: int, r: float, grid: DomainGrid, settings: Settings
) -> np.ndarray:
    derived = derive(WeierstrassData(g, w, eps, grid, a=r, b=-eps * r, c=0, f0=1), settings)
    F = integrate_F(derived.data, derived.f, settings)
    g_values = derived.data.on_grid(g, settings.tolerances.pole_eps)
    delta = cmc_omega(g_values, eps, 1.0)
    X = (F @ delta @ dagger(F) - np.diag([-eps, 1.0]).astype(complex)) / r
    logger.info(f"Deformation member r = {r} integrated")
    return to_components(X).real


def _metric(X: np.ndarray, grid: DomainGrid, accuracy: int) -> Tuple[np.ndarray, GridCalculus]:
    calc = GridCalculus(from_components(X), grid, accuracy)
    return 2 * np.real(bilinear(calc.dz, calc.dzbar)), calc


def deformation_family(
    g: AnalyticExpr,
    w: AnalyticExpr,
    eps: int,
    grid: DomainGrid,
    r_list: Optional[Sequence[float]] = None,
    settings: Optional[Settings] = None,
    levels: Optional[int] = None,
) -> DeformationFamily:
    """
    Translated CMC immersions X_r and their limit X_0 as r -> 0.

    X_0 is extrapolated by Neville's scheme over the `levels` smallest r values
    (all of them by default).
    """
    settings = settings or get_settings()
    tol = settings.tolerances
    g0 = complex(g.evaluate(grid.base_node, tol.pole_eps))
    if abs(g0) > 1e-12:
        raise GNotZeroAtBase(f"g(z0) = {g0} must vanish", value=g0)
    r_values = tuple(sorted({float(r) for r in (r_list or settings.default_r_list)}, reverse=True))
    if len(r_values) < 2 or r_values[-1] <= 0:
        raise InvalidData("Deformation needs at least two distinct positive r values", r_list=list(r_values))

    with ThreadPoolExecutor(max_workers=max(1, settings.workers)) as pool:
        X = tuple(pool.map(lambda r: _translated_immersion(g, w, eps, r, grid, settings), r_values))

    use = len(r_values) if levels is None else max(2, min(levels, len(r_values)))
    X0 = neville_at_zero(r_values[-use:], X[-use:])
    sup = tuple(finite_max(np.sqrt(np.sum((x - X0) ** 2, axis=-1)), "deformation difference") for x in X)
    slope = float(np.polyfit(np.log(r_values), np.log(sup), 1)[0])

    lam0, calc0 = _metric(X0, grid, settings.fd_order)
    H0 = (2 / lam0)[..., None, None] * calc0.dz_dzbar
    mean = np.sqrt(euclid_norm2(H0))
    isometry = max(
        finite_max(np.abs(_metric(x, grid, settings.fd_order)[0] - lam0) / lam0, "metric") for x in X
    )
    oracle = weierstrass_closed_form(g, w, eps, grid, settings=settings)
    procrustes, _ = procrustes_residual(X0, oracle.components, grid.base_index)

    checks = [
        CheckResult("deformation_slope", abs(slope - 1.0), 0.1),
        CheckResult("deformation_mean_curvature", finite_max(mean, "mean curvature of X0"), tol.tol_geo),
        CheckResult("deformation_isometry", isometry, tol.tol_geo),
        CheckResult("deformation_procrustes", procrustes, tol.tol_geo),
    ]
    logger.info(f"Deformation slope {slope:.4f}, Procrustes residual {procrustes:.2e}")
    return DeformationFamily(r_values, X, X0, sup, slope, checks)


@dataclass(frozen=True, eq=False)
class CZeroFamily:
    data: WeierstrassData
    f: FField
    parallel_H: bool


def c_zero_family(
    g: AnalyticExpr,
    w: AnalyticExpr,
    eps: int,
    a: float,
    b: float,
    f0: complex,
    grid: DomainGrid,
    settings: Optional[Settings] = None,
) -> CZeroFamily:
    """Data with c = 0, where f = f0 + (a + eps b) times a primitive of g omega"""
    settings = settings or get_settings()
    tol = settings.tolerances
    data = WeierstrassData(g, w, eps, grid, a=a, b=b, c=0, f0=f0)
    k = a + eps * b
    if k == 0 and abs(complex(f0)) <= tol.f_eps:
        raise FVanishes("f0 = 0 with a + eps b = 0 makes f vanish identically", f0=complex(f0))
    gw = g * w
    prim = path_primitive(lambda z: gw.evaluate(z, tol.pole_eps), grid, tol.tol_loop)
    values = f0 + k * prim.values
    magnitude = np.where(grid.active, np.abs(values), np.inf)
    idx = np.unravel_index(int(np.argmin(magnitude)), grid.shape)
    if magnitude[idx] <= tol.f_eps:
        raise FVanishes(
            "The primitive of g omega reaches -f0/(a + eps b)",
            location=complex(grid.nodes[idx]),
            primitive_value=-complex(f0) / k,
        )
    return CZeroFamily(data, FField(values, grid, prim.loop_residual), k == 0)


def integral_frame(data: WeierstrassData, f: FField, settings: Optional[Settings] = None) -> np.ndarray:
    """F = [[1, 0], [integral of g'/f, 1]], valid when a = c = 0"""
    settings = settings or get_settings()
    if data.a != 0 or data.c != 0:
        raise InvalidData("The integral frame needs a = c = 0", a=data.a, c=data.c)
    pole_eps = settings.tolerances.pole_eps
    kappa, dg = data.df_integrand, data.dg

    def deriv(z, y, dz):
        out = np.empty_like(y)
        out[:, 0] = kappa.evaluate(z, pole_eps) * dz
        out[:, 1] = dg.evaluate(z, pole_eps) / y[:, 0] * dz
        return out

    grid = f.grid
    i0, j0 = grid.base_index
    connection = ConnectionMatrix(data, pole_eps)
    rule = substep_rule(lambda z, y: connection.norm(z, y[:, 0]), settings.min_substeps, settings.substep_norm_target)
    states = transport(grid, grid.spanning_tree(), np.array([f.values[i0, j0], 0]), deriv, rule)
    F = np.zeros(grid.shape + (2, 2), dtype=complex)
    F[..., 0, 0] = 1
    F[..., 1, 1] = 1
    F[..., 1, 0] = states[:, 1].reshape(grid.shape)
    return np.where(grid.active[..., None, None], F, np.nan)
