"""
Weierstrass data, the admissibility conditions and the derived function f.
"""

import dataclasses
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import List, Optional, Tuple

import numpy as np

from app.core.config import Settings, get_settings
from app.core.errors import C1Violation, C2Violation, InvalidData, ZeroOfF
from app.geometry.expressions import AnalyticExpr, Const, polynomial
from app.geometry.grid import DomainGrid, cell_loop_residual, path_primitive, substep_rule
from app.geometry.polynomials import PolyC, find_roots, net_orders

logger = logging.getLogger(__name__)

MATCH_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class WeierstrassData:
    """g, omega = w dz, epsilon, the constants a, b, c and f(z0) = f0 on a grid"""

    g: AnalyticExpr
    w: AnalyticExpr
    eps: int
    grid: DomainGrid
    a: float = 0.0
    b: float = 0.0
    c: complex = 0j
    f0: complex = 1 + 0j

    def __post_init__(self):
        if self.eps not in (-1, 1):
            raise InvalidData(f"epsilon must be -1 or +1, got {self.eps}")
        if isinstance(self.w, Const) and self.w.value == 0:
            raise InvalidData("omega vanishes identically")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "c", complex(self.c))
        object.__setattr__(self, "f0", complex(self.f0))

    @property
    def z0(self) -> complex:
        return self.grid.z0

    @cached_property
    def dg(self) -> AnalyticExpr:
        return self.g.derivative()

    @cached_property
    def ddg(self) -> AnalyticExpr:
        return self.dg.derivative()

    @cached_property
    def df_integrand(self) -> AnalyticExpr:
        """(c + (a + eps b) g + eps conj(c) g^2) w"""
        quadratic = Const(self.c) + Const(self.a + self.eps * self.b) * self.g
        quadratic = quadratic + Const(self.eps * self.c.conjugate()) * self.g**2
        return quadratic * self.w

    @cached_property
    def theta(self) -> AnalyticExpr:
        """Upper-right entry of the connection, (a + eps conj(c) g) w"""
        return (Const(self.a) + Const(self.eps * self.c.conjugate()) * self.g) * self.w

    def with_grid(self, grid: DomainGrid) -> "WeierstrassData":
        return dataclasses.replace(self, grid=grid)

    def on_grid(self, expr: AnalyticExpr, pole_eps: float = 1e-12) -> np.ndarray:
        return self.grid.sample(lambda z: expr.evaluate(z, pole_eps))


@dataclass(frozen=True, eq=False)
class C1Report:
    min_margin: float
    argmin: complex
    pole_matches: Tuple[Tuple[complex, int, int], ...]  # (pole of g, k, order of the zero of w)


@dataclass(frozen=True, eq=False)
class FField:
    values: np.ndarray
    grid: DomainGrid
    loop_residual: float = 0.0
    closed_form: Optional[PolyC] = None
    zero_nodes: Tuple[complex, ...] = ()

    @property
    def expr(self) -> Optional[AnalyticExpr]:
        return None if self.closed_form is None else polynomial(self.closed_form)


@dataclass(frozen=True, eq=False)
class C2Report:
    max_q: float
    loop_residual: float
    order_checks: Tuple[Tuple[complex, int, int], ...]  # (zero of f, its order, order of w g' there)


@dataclass(frozen=True, eq=False)
class HopfDensity:
    values: np.ndarray
    flat: bool


@dataclass(frozen=True)
class IndicialEntry:
    pole: complex
    k: int
    delta: int
    roots: Tuple[int, int]
    consistent: bool


@dataclass(frozen=True, eq=False)
class DerivedData:
    data: WeierstrassData
    f: FField
    q: np.ndarray
    parallel_H: bool
    flat: bool
    c1: C1Report
    c2: C2Report
    masked_centers: Tuple[complex, ...] = ()

    @property
    def grid(self) -> DomainGrid:
        return self.data.grid


def _rational_parts(expr: AnalyticExpr):
    rational = expr.as_rational()
    if rational is None or rational[0].is_zero():
        return None
    return rational


def _expanded_rect(grid: DomainGrid, margin: float) -> Tuple[float, float, float, float]:
    return grid.x_min - margin, grid.x_max + margin, grid.y_min - margin, grid.y_max + margin


def mask_singularities(data: WeierstrassData, settings: Optional[Settings] = None) -> Tuple[WeierstrassData, Tuple[complex, ...]]:
    """Mask disks around poles of g and nodes where g, g' or w cannot be evaluated"""
    settings = settings or get_settings()
    grid = data.grid
    radius = settings.mask_radius_factor * grid.h
    centers: List[complex] = []
    for expr in (data.g, data.w):
        parts = _rational_parts(expr)
        if parts is not None:
            for root, order in net_orders(*parts, rect=_expanded_rect(grid, radius)):
                if order < 0:
                    centers.append(root)
    bad = np.zeros(grid.shape, dtype=bool)
    pole_eps = settings.tolerances.pole_eps
    for expr in (data.g, data.dg, data.w):
        values = expr.evaluate(grid.nodes, pole_eps, strict=False)
        bad |= ~np.isfinite(values)
    centers += [complex(z) for z in grid.nodes[bad & grid.active]]
    if not centers:
        return data, ()
    masked = grid.masked_disks(centers, radius)
    logger.warning(
        f"Masked {int((masked.mask & ~grid.mask).sum())} nodes around {len(centers)} singular points"
    )
    return data.with_grid(masked), tuple(centers)


def validate_C1(data: WeierstrassData, settings: Optional[Settings] = None) -> C1Report:
    """Positivity of 1 - eps|g|^2 and pole/zero matching between g and omega"""
    settings = settings or get_settings()
    grid = data.grid
    matches: List[Tuple[complex, int, int]] = []
    g_parts, w_parts = _rational_parts(data.g), _rational_parts(data.w)
    if g_parts is not None and w_parts is not None:
        g_orders = net_orders(*g_parts, rect=grid.rect)
        w_orders = net_orders(*w_parts, rect=grid.rect)
        for root, order in w_orders:
            if order < 0:
                raise C1Violation("omega has a pole inside the domain", root=root, order=-order)
        w_zeros = [(r, k) for r, k in w_orders if k > 0]
        used = set()
        for root, order in g_orders:
            if order >= 0:
                continue
            k = -order
            found = [
                (idx, m) for idx, (r, m) in enumerate(w_zeros) if abs(r - root) <= MATCH_TOL * (1 + abs(root))
            ]
            zero_order = found[0][1] if found else 0
            if zero_order != 2 * k:
                raise C1Violation(
                    f"Pole of g of order {k} needs a zero of omega of order {2 * k}, found {zero_order}",
                    root=root,
                    pole_order=k,
                    zero_order=zero_order,
                )
            used.add(found[0][0])
            matches.append((root, k, zero_order))
        for idx, (root, m) in enumerate(w_zeros):
            if idx not in used:
                raise C1Violation("Zero of omega away from the poles of g", root=root, zero_order=m)
    g_values = data.on_grid(data.g, settings.tolerances.pole_eps)
    margin = 1 - data.eps * np.abs(g_values) ** 2
    margin = np.where(grid.active, margin, np.inf)
    idx = np.unravel_index(int(np.argmin(margin)), grid.shape)
    worst = float(margin[idx])
    node = complex(grid.nodes[idx])
    if not worst > 0:
        raise C1Violation(f"1 - eps|g|^2 = {worst:.6g} is not positive", node=node, value=worst)
    return C1Report(worst, node, tuple(matches))


def build_f(data: WeierstrassData, settings: Optional[Settings] = None) -> Tuple[WeierstrassData, FField]:
    """
    f = f0 + integral of (c + (a+eps b) g + eps conj(c) g^2) w from z0.

    Zeros of f on unmasked nodes are masked when c != 0 and rejected otherwise;
    the returned data carries the possibly enlarged mask.
    """
    settings = settings or get_settings()
    tol = settings.tolerances
    integrand = data.df_integrand
    primitive = path_primitive(lambda z: integrand.evaluate(z, tol.pole_eps), data.grid, tol.tol_loop)
    values = data.f0 + primitive.values
    closed = None
    kappa = integrand.as_polynomial()
    if kappa is not None:
        antiderivative = kappa.integral()
        closed = antiderivative - antiderivative(data.grid.base_node) + data.f0
    zero = data.grid.active & (np.abs(values) < tol.f_eps)
    zero_nodes: Tuple[complex, ...] = tuple(complex(z) for z in data.grid.nodes[zero])
    if zero_nodes:
        if data.c == 0:
            raise ZeroOfF("f vanishes on an unmasked node", node=zero_nodes[0], count=len(zero_nodes))
        logger.warning(f"f vanishes at {len(zero_nodes)} nodes; masking them")
        grid = data.grid.masked_disks(zero_nodes, settings.mask_radius_factor * data.grid.h)
        data = data.with_grid(grid)
        values = np.where(grid.active, values, np.nan)
    logger.info(f"Built f on {int(data.grid.active.sum())} nodes (loop residual {primitive.loop_residual:.2e})")
    return data, FField(values, data.grid, primitive.loop_residual, closed, zero_nodes)


def hopf_values(data: WeierstrassData, f: FField, pole_eps: float = 1e-12) -> np.ndarray:
    q = data.on_grid(data.w * data.dg, pole_eps) / f.values
    return np.where(f.grid.active, q, np.nan)


def validate_C2(data: WeierstrassData, f: FField, settings: Optional[Settings] = None) -> C2Report:
    """Boundedness and cell-loop closure of q = w g'/f, plus exact order checks when f is a polynomial"""
    settings = settings or get_settings()
    tol = settings.tolerances
    grid = f.grid
    with np.errstate(divide="ignore", invalid="ignore"):
        q = hopf_values(data, f, tol.pole_eps)
    bad = grid.active & ~(np.abs(q) <= tol.q_bound)
    if bad.any():
        node = complex(grid.nodes[bad][0])
        raise C2Violation("omega dg/f is unbounded", location=node)
    max_q = float(np.nanmax(np.abs(q), initial=0.0))

    checks: List[Tuple[complex, int, int]] = []
    parts = _rational_parts(data.w * data.dg)
    if f.closed_form is not None and f.closed_form.degree > 0 and parts is not None:
        orders = dict(net_orders(*parts))
        for root, m in find_roots(f.closed_form):
            if not (grid.x_min <= root.real <= grid.x_max and grid.y_min <= root.imag <= grid.y_max):
                continue
            have = next((k for r, k in orders.items() if abs(r - root) <= MATCH_TOL * (1 + abs(root))), 0)
            if have < m:
                raise C2Violation(
                    f"Zero of f of order {m} is not cancelled by omega dg (order {have})",
                    location=root,
                    f_order=m,
                    numerator_order=have,
                )
            checks.append((root, m, have))

    kappa, wdg = data.df_integrand, data.w * data.dg

    def deriv(z, y, dz):
        out = np.empty_like(y)
        out[:, 0] = kappa.evaluate(z, tol.pole_eps) * dz
        out[:, 1] = wdg.evaluate(z, tol.pole_eps) / y[:, 0] * dz
        return out

    states = np.stack([f.values.ravel(), np.zeros(f.values.size, dtype=complex)], axis=1)
    rule = substep_rule(
        lambda z, y: np.abs(wdg.evaluate(z, tol.pole_eps) / y[:, 0]) + np.abs(kappa.evaluate(z, tol.pole_eps)),
        settings.min_substeps,
        settings.substep_norm_target,
    )
    residual = cell_loop_residual(grid, states, deriv, rule, components=slice(1, 2))
    normalized = residual / (2 * (grid.hx + grid.hy) * max(1.0, max_q))
    loop = float(np.nanmax(normalized, initial=0.0))
    if loop > tol.tol_loop:
        i, j = np.unravel_index(int(np.nanargmax(normalized)), normalized.shape)
        raise C2Violation(
            "Loop integral of omega dg/f does not close",
            location=complex(grid.nodes[i, j] + 0.5 * (grid.hx + 1j * grid.hy)),
            residual=loop,
        )
    return C2Report(max_q, loop, tuple(checks))


def hopf_density(data: WeierstrassData, f: FField, settings: Optional[Settings] = None) -> HopfDensity:
    settings = settings or get_settings()
    q = hopf_values(data, f, settings.tolerances.pole_eps)
    flat = float(np.nanmax(np.abs(q), initial=0.0)) < settings.tolerances.q_eps
    if flat:
        logger.warning("Hopf density vanishes identically; the data is flat")
    return HopfDensity(q, flat)


def f_is_constant(f: FField, f0: complex, f_const_eps: float) -> bool:
    variation = float(np.nanmax(np.abs(f.values - f0), initial=0.0))
    return variation <= f_const_eps * max(abs(f0), 1e-300)


def pole_indicial_report(data: WeierstrassData, f: FField) -> List[IndicialEntry]:
    """Indicial roots -k, -delta at each pole of g inside the rectangle"""
    parts = _rational_parts(data.g)
    if parts is None or f.closed_form is None:
        return []
    f_roots = find_roots(f.closed_form) if f.closed_form.degree > 0 else []
    entries = []
    for root, order in net_orders(*parts, rect=data.grid.rect):
        if order >= 0:
            continue
        k = -order
        delta = next((m for r, m in f_roots if abs(r - root) <= MATCH_TOL * (1 + abs(root))), 0)
        consistent = delta in (0, 1) if data.c != 0 else delta == 0
        entries.append(IndicialEntry(root, k, delta, (-k, -delta), consistent))
    return entries


def derive(data: WeierstrassData, settings: Optional[Settings] = None) -> DerivedData:
    """Mask, validate and build everything downstream construction needs"""
    settings = settings or get_settings()
    data, centers = mask_singularities(data, settings)
    data.grid.check_topology()
    c1 = validate_C1(data, settings)
    data, f = build_f(data, settings)
    data.grid.check_topology()
    c2 = validate_C2(data, f, settings)
    hopf = hopf_density(data, f, settings)
    parallel = f_is_constant(f, data.f0, settings.tolerances.f_const_eps)
    return DerivedData(data, f, hopf.values, parallel, hopf.flat, c1, c2, centers)
