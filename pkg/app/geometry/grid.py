"""
Rectangular sample grids in the complex plane and the numerics that run on them.

Nodes are indexed (i, j) with z = x_i + i*y_j, so axis 0 is the real direction.
Integration follows breadth-first spanning trees rooted at the base node; each
tree level is integrated as one vectorized batch.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from app.core.errors import DomainTopologyError, InvalidData, LoopClosureFailure

logger = logging.getLogger(__name__)

# (z, state, dz) -> d(state)/dt along the edge z(t) = z_a + t*dz
EdgeDerivative = Callable[[np.ndarray, np.ndarray, np.ndarray], np.ndarray]
# (z_start, state, dz) -> substeps for a batch of edges
SubstepRule = Callable[[np.ndarray, np.ndarray, np.ndarray], int]

_NEIGHBORS_X = ((-1, 0), (1, 0), (0, -1), (0, 1))
_NEIGHBORS_Y = ((0, -1), (0, 1), (-1, 0), (1, 0))


@dataclass(frozen=True, eq=False)
class DomainGrid:
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    nx: int
    ny: int
    z0: complex
    mask: np.ndarray = field(repr=False)

    @classmethod
    def rectangle(
        cls,
        x_min: float,
        x_max: float,
        y_min: float,
        y_max: float,
        n: int,
        z0: complex = 0j,
    ) -> "DomainGrid":
        """
        Grid with n nodes along x and the same spacing along y.

        The base point is snapped to the nearest node.
        """
        if not (x_max > x_min and y_max > y_min):
            raise InvalidData("Grid rectangle is empty", x=(x_min, x_max), y=(y_min, y_max))
        if n < 3:
            raise InvalidData(f"Grid needs at least 3 nodes per side, got {n}")
        h = (x_max - x_min) / (n - 1)
        ny = int(round((y_max - y_min) / h)) + 1
        if ny < 3:
            raise InvalidData("Grid rectangle is too thin for the requested resolution")
        y_max = y_min + (ny - 1) * h
        grid = cls(x_min, x_max, y_min, y_max, n, ny, complex(z0), np.zeros((n, ny), dtype=bool))
        i0, j0 = grid.nearest_index(z0)
        snapped = complex(grid.xs[i0], grid.ys[j0])
        if abs(snapped - z0) > 1e-12 * (1 + abs(z0)):
            if not (x_min <= z0.real <= x_max and y_min <= z0.imag <= y_max):
                raise InvalidData(f"Base point {z0} lies outside the grid rectangle")
            logger.warning(f"Base point {z0} snapped to grid node {snapped}")
        return cls(x_min, x_max, y_min, y_max, n, ny, snapped, grid.mask)

    @property
    def rect(self) -> Tuple[float, float, float, float]:
        return self.x_min, self.x_max, self.y_min, self.y_max

    @cached_property
    def xs(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.nx)

    @cached_property
    def ys(self) -> np.ndarray:
        return np.linspace(self.y_min, self.y_max, self.ny)

    @property
    def hx(self) -> float:
        return (self.x_max - self.x_min) / (self.nx - 1)

    @property
    def hy(self) -> float:
        return (self.y_max - self.y_min) / (self.ny - 1)

    @property
    def h(self) -> float:
        return max(self.hx, self.hy)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nx, self.ny

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.xs[:, None] + 1j * self.ys[None, :]

    @property
    def active(self) -> np.ndarray:
        return ~self.mask

    def nearest_index(self, z: complex) -> Tuple[int, int]:
        i = int(np.clip(round((z.real - self.x_min) / self.hx), 0, self.nx - 1))
        j = int(np.clip(round((z.imag - self.y_min) / self.hy), 0, self.ny - 1))
        return i, j

    @property
    def base_index(self) -> Tuple[int, int]:
        return self.nearest_index(self.z0)

    @property
    def base_node(self) -> complex:
        """The grid node the base point snaps to"""
        i0, j0 = self.base_index
        return complex(self.nodes[i0, j0])

    def with_mask(self, extra: np.ndarray) -> "DomainGrid":
        return DomainGrid(
            self.x_min, self.x_max, self.y_min, self.y_max, self.nx, self.ny, self.z0, self.mask | extra
        )

    def masked_disks(self, centers: Iterable[complex], radius: float) -> "DomainGrid":
        """Mask every node within radius of any center"""
        extra = np.zeros(self.shape, dtype=bool)
        for c in centers:
            extra |= np.abs(self.nodes - c) <= radius
        return self.with_mask(extra)

    def sample(self, values: Callable[[np.ndarray], np.ndarray], dtype=complex) -> np.ndarray:
        """Evaluate on unmasked nodes, NaN elsewhere"""
        out = np.full(self.shape, np.nan, dtype=dtype)
        out[self.active] = values(self.nodes[self.active])
        return out

    def check_topology(self) -> None:
        """The unmasked nodes must be 4-connected to the base node and enclose no masked hole"""
        i0, j0 = self.base_index
        if self.mask[i0, j0]:
            raise DomainTopologyError("Base node is masked", base=self.z0)
        seen = _flood(self.active, (i0, j0), _NEIGHBORS_X)
        stranded = self.active & ~seen
        if stranded.any():
            i, j = np.argwhere(stranded)[0]
            raise DomainTopologyError(
                "Masking disconnects the grid", node=complex(self.nodes[i, j]), stranded=int(stranded.sum())
            )
        # Masked nodes must reach the outside through masked nodes (8-connectivity)
        padded = np.pad(self.mask, 1, constant_values=True)
        outside = _flood(padded, (0, 0), _NEIGHBORS_X + ((-1, -1), (-1, 1), (1, -1), (1, 1)))
        holes = padded & ~outside
        if holes.any():
            i, j = np.argwhere(holes)[0] - 1
            raise DomainTopologyError(
                "Masked region encloses a hole; the domain is not simply connected",
                node=complex(self.nodes[i, j]),
            )

    def spanning_tree(self, prefer: str = "x") -> "SpanningTree":
        return SpanningTree.build(self, prefer)


def _flood(allowed: np.ndarray, start: Tuple[int, int], steps: Sequence[Tuple[int, int]]) -> np.ndarray:
    seen = np.zeros_like(allowed, dtype=bool)
    seen[start] = True
    queue = deque([start])
    nx, ny = allowed.shape
    while queue:
        i, j = queue.popleft()
        for di, dj in steps:
            a, b = i + di, j + dj
            if 0 <= a < nx and 0 <= b < ny and allowed[a, b] and not seen[a, b]:
                seen[a, b] = True
                queue.append((a, b))
    return seen


@dataclass(frozen=True, eq=False)
class SpanningTree:
    """Breadth-first tree over unmasked nodes; each level holds (parent, child) flat indices"""

    root: int
    levels: Tuple[Tuple[np.ndarray, np.ndarray], ...]
    prefer: str

    @classmethod
    def build(cls, grid: DomainGrid, prefer: str = "x") -> "SpanningTree":
        if prefer not in ("x", "y"):
            raise ValueError(f"prefer must be 'x' or 'y', got {prefer!r}")
        steps = _NEIGHBORS_X if prefer == "x" else _NEIGHBORS_Y
        nx, ny = grid.shape
        depth = np.full(grid.shape, -1, dtype=int)
        i0, j0 = grid.base_index
        if grid.mask[i0, j0]:
            raise DomainTopologyError("Base node is masked", base=grid.z0)
        depth[i0, j0] = 0
        queue = deque([(i0, j0)])
        order: List[Tuple[int, int]] = []
        while queue:
            i, j = queue.popleft()
            for di, dj in _NEIGHBORS_X:
                a, b = i + di, j + dj
                if 0 <= a < nx and 0 <= b < ny and grid.active[a, b] and depth[a, b] < 0:
                    depth[a, b] = depth[i, j] + 1
                    queue.append((a, b))
                    order.append((a, b))
        by_level: List[Tuple[List[int], List[int]]] = [([], []) for _ in range(int(depth.max()))]
        for a, b in order:
            d = depth[a, b]
            for di, dj in steps:
                p, q = a + di, b + dj
                if 0 <= p < nx and 0 <= q < ny and depth[p, q] == d - 1:
                    by_level[d - 1][0].append(p * ny + q)
                    by_level[d - 1][1].append(a * ny + b)
                    break
        levels = tuple((np.array(ps, dtype=int), np.array(cs, dtype=int)) for ps, cs in by_level)
        return cls(i0 * ny + j0, levels, prefer)


def rk4_edges(
    z_start: np.ndarray, dz: np.ndarray, y0: np.ndarray, deriv: EdgeDerivative, substeps: int
) -> np.ndarray:
    """Classical fourth-order integration of a batch of edges over t in [0, 1]"""
    y = y0.copy()
    step = 1.0 / substeps
    for s in range(substeps):
        za = z_start + (s * step) * dz
        zm = za + (0.5 * step) * dz
        zb = za + step * dz
        k1 = deriv(za, y, dz)
        k2 = deriv(zm, y + (0.5 * step) * k1, dz)
        k3 = deriv(zm, y + (0.5 * step) * k2, dz)
        k4 = deriv(zb, y + step * k3, dz)
        y = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return y


def transport(
    grid: DomainGrid,
    tree: SpanningTree,
    base_state: np.ndarray,
    deriv: EdgeDerivative,
    substeps: SubstepRule,
) -> np.ndarray:
    """Carry a state vector from the root along every tree edge; returns (nx*ny, k), NaN off-tree"""
    base_state = np.asarray(base_state, dtype=complex)
    nodes = grid.nodes.ravel()
    states = np.full((nodes.size, base_state.size), np.nan, dtype=complex)
    states[tree.root] = base_state
    for parents, children in tree.levels:
        za = nodes[parents]
        dz = nodes[children] - za
        y0 = states[parents]
        states[children] = rk4_edges(za, dz, y0, deriv, substeps(za, y0, dz))
    return states


def cell_loop_residual(
    grid: DomainGrid,
    states: np.ndarray,
    deriv: EdgeDerivative,
    substeps: SubstepRule,
    components: Optional[slice] = None,
) -> np.ndarray:
    """
    Integrate around every cell counter-clockwise starting from the stored corner state.

    Returns the per-cell max-norm mismatch, NaN for cells with a masked corner.
    """
    nx, ny = grid.shape
    ok = grid.active[:-1, :-1] & grid.active[1:, :-1] & grid.active[1:, 1:] & grid.active[:-1, 1:]
    out = np.full((nx - 1, ny - 1), np.nan)
    if not ok.any():
        return out
    ci, cj = np.nonzero(ok)
    nodes = grid.nodes
    corners = [nodes[ci, cj], nodes[ci + 1, cj], nodes[ci + 1, cj + 1], nodes[ci, cj + 1]]
    start = states.reshape(nx, ny, -1)[ci, cj]
    y = start
    for k in range(4):
        za, zb = corners[k], corners[(k + 1) % 4]
        y = rk4_edges(za, zb - za, y, deriv, substeps(za, y, zb - za))
    diff = np.abs(y - start)
    if components is not None:
        diff = diff[:, components]
    out[ci, cj] = diff.max(axis=1)
    return out


def substep_rule(norm: Callable[[np.ndarray, np.ndarray], np.ndarray], minimum: int, target: float) -> SubstepRule:
    """Substeps so that norm * |dz| / n stays below target"""

    def rule(z_start: np.ndarray, state: np.ndarray, dz: np.ndarray) -> int:
        size = np.nanmax(norm(z_start, state) * np.abs(dz), initial=0.0)
        if not np.isfinite(size):
            return minimum
        return max(minimum, int(math.ceil(size / target)))

    return rule


# Gauss-Legendre, two points on [0, 1]
_GL_T = (0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0))


def _edge_quadrature(e: Callable[[np.ndarray], np.ndarray], za: np.ndarray, dz: np.ndarray, pieces: int) -> np.ndarray:
    total = np.zeros(za.shape, dtype=complex)
    for s in range(pieces):
        for t in _GL_T:
            total = total + 0.5 * e(za + ((s + t) / pieces) * dz)
    return total * dz / pieces


@dataclass(frozen=True, eq=False)
class Primitive:
    values: np.ndarray
    loop_residual: float


def path_primitive(
    e: Callable[[np.ndarray], np.ndarray],
    grid: DomainGrid,
    tol_loop: float = 1e-9,
    pieces: int = 1,
    prefer: str = "x",
    check_loops: bool = True,
) -> Primitive:
    """
    Primitive P with P(z0) = 0 and dP = e dz along the spanning tree.

    Raises LoopClosureFailure when a cell integral exceeds tol_loop times the
    cell perimeter, scaled by max(1, max|e|).
    """
    tree = grid.spanning_tree(prefer)
    nodes = grid.nodes.ravel()
    values = np.full(nodes.size, np.nan, dtype=complex)
    values[tree.root] = 0
    for parents, children in tree.levels:
        za = nodes[parents]
        values[children] = values[parents] + _edge_quadrature(e, za, nodes[children] - za, pieces)
    values = values.reshape(grid.shape)
    residual = 0.0
    if check_loops:
        residual = _primitive_loops(e, grid, tol_loop, pieces)
    return Primitive(values, residual)


def _primitive_loops(e, grid: DomainGrid, tol_loop: float, pieces: int) -> float:
    ok = grid.active[:-1, :-1] & grid.active[1:, :-1] & grid.active[1:, 1:] & grid.active[:-1, 1:]
    if not ok.any():
        return 0.0
    ci, cj = np.nonzero(ok)
    nodes = grid.nodes
    corners = [nodes[ci, cj], nodes[ci + 1, cj], nodes[ci + 1, cj + 1], nodes[ci, cj + 1]]
    total = np.zeros(ci.size, dtype=complex)
    for k in range(4):
        za, zb = corners[k], corners[(k + 1) % 4]
        total = total + _edge_quadrature(e, za, zb - za, pieces)
    scale = max(1.0, float(np.nanmax(np.abs(e(nodes[grid.active])), initial=0.0)))
    perimeter = 2 * (grid.hx + grid.hy)
    normalized = np.abs(total) / (perimeter * scale)
    worst = int(np.argmax(normalized))
    if normalized[worst] > tol_loop:
        center = complex(nodes[ci[worst], cj[worst]] + 0.5 * (grid.hx + 1j * grid.hy))
        raise LoopClosureFailure(
            "Cell integral does not close; a singularity may lie inside the region",
            location=center,
            residual=float(normalized[worst]),
        )
    return float(normalized.max())


# Central finite differences, coefficients over offsets -p..p and their denominators
_STENCILS = {
    (1, 4): ((1, -8, 0, 8, -1), 12.0),
    (1, 6): ((-1, 9, -45, 0, 45, -9, 1), 60.0),
    (2, 4): ((-1, 16, -30, 16, -1), 12.0),
    (2, 6): ((2, -27, 270, -490, 270, -27, 2), 180.0),
}


def central_difference(values: np.ndarray, h: float, axis: int, order: int = 1, accuracy: int = 6) -> np.ndarray:
    """Derivative along an axis; NaN where the stencil leaves the grid or touches NaN"""
    try:
        weights, denominator = _STENCILS[(order, accuracy)]
    except KeyError:
        raise ValueError(f"No stencil for derivative order {order} with accuracy {accuracy}")
    p = len(weights) // 2
    values = np.moveaxis(np.asarray(values), axis, 0)
    n = values.shape[0]
    out = np.full(values.shape, np.nan, dtype=np.result_type(values, float))
    if n > 2 * p:
        acc = np.zeros_like(out[p : n - p])
        for k, w in enumerate(weights):
            if w:
                acc = acc + w * values[k : n - 2 * p + k]
        out[p : n - p] = acc / (denominator * h**order)
    return np.moveaxis(out, 0, axis)


class GridCalculus:
    """Wirtinger derivatives of a sampled field; the first two axes are x and y"""

    def __init__(self, values: np.ndarray, grid: DomainGrid, accuracy: int = 6):
        self.values = values
        self.grid = grid
        self.accuracy = accuracy

    def _d(self, values, axis, order=1):
        h = self.grid.hx if axis == 0 else self.grid.hy
        return central_difference(values, h, axis, order, self.accuracy)

    @cached_property
    def dx(self):
        return self._d(self.values, 0)

    @cached_property
    def dy(self):
        return self._d(self.values, 1)

    @cached_property
    def dxx(self):
        return self._d(self.values, 0, 2)

    @cached_property
    def dyy(self):
        return self._d(self.values, 1, 2)

    @cached_property
    def dxy(self):
        return self._d(self.dx, 1)

    @property
    def dz(self):
        return 0.5 * (self.dx - 1j * self.dy)

    @property
    def dzbar(self):
        return 0.5 * (self.dx + 1j * self.dy)

    @property
    def dz_dzbar(self):
        return 0.25 * (self.dxx + self.dyy)

    @property
    def dzz(self):
        return 0.25 * (self.dxx - self.dyy - 2j * self.dxy)


def holomorphic_derivative(values: np.ndarray, grid: DomainGrid, accuracy: int = 6, order: int = 1) -> np.ndarray:
    """d/dz of a holomorphic field, taken along the real direction"""
    return central_difference(values, grid.hx, 0, order, accuracy)


def finite_max(values: np.ndarray, what: str) -> float:
    """Max over finite entries; InvalidData when no node survives the stencil margins"""
    arr = np.abs(np.asarray(values))
    finite = arr[np.isfinite(arr)]
    if finite.size == 0:
        raise InvalidData(f"No finite samples for {what}; the grid is too small for the stencils")
    return float(finite.max())
