"""
Frame integration: F' = F A, the immersion psi and the recovered Omega.

The state carried along tree edges is (f, F11, F12, F21, F22, psi11, psi12, psi21, psi22).
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np

from app.core.config import Settings, get_settings
from app.core.errors import DetDrift, FlatData, LoopClosureFailure, SingularFrame
from app.geometry.grid import (
    DomainGrid,
    GridCalculus,
    cell_loop_residual,
    finite_max,
    holomorphic_derivative,
    substep_rule,
    transport,
)
from app.geometry.lorentz import dagger, det2, inv2
from app.geometry.weierstrass import DerivedData, FField, WeierstrassData

logger = logging.getLogger(__name__)

F_SLICE = slice(1, 5)
PSI_SLICE = slice(5, 9)


class ConnectionMatrix:
    """z, f -> [[0, (a + eps conj(c) g) w], [g'/f, 0]]"""

    def __init__(self, data: WeierstrassData, pole_eps: float = 1e-12):
        self.data = data
        self.pole_eps = pole_eps

    def __call__(self, z: np.ndarray, f: np.ndarray) -> np.ndarray:
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape + (2, 2), dtype=complex)
        out[..., 0, 1] = self.data.theta.evaluate(z, self.pole_eps)
        out[..., 1, 0] = self.data.dg.evaluate(z, self.pole_eps) / f
        return out

    def norm(self, z: np.ndarray, f: np.ndarray) -> np.ndarray:
        m = self(z, f)
        return np.maximum(np.abs(m[..., 0, 1]), np.abs(m[..., 1, 0]))


def _source(data: WeierstrassData, f: np.ndarray, z: np.ndarray, pole_eps: float) -> np.ndarray:
    g = data.g.evaluate(z, pole_eps)
    w = data.w.evaluate(z, pole_eps)
    m = np.zeros(z.shape + (2, 2), dtype=complex)
    m[..., 0, 0] = data.eps * g * np.conj(f) * w
    m[..., 0, 1] = (1 - data.eps * np.abs(g) ** 2) * w
    return m


def psi_z_form(data: WeierstrassData, f: np.ndarray, F: np.ndarray, z: np.ndarray, pole_eps: float = 1e-12) -> np.ndarray:
    """phi = F [[eps g conj(f) w, (1 - eps|g|^2) w], [0, 0]] F*"""
    return F @ _source(data, f, np.asarray(z, dtype=complex), pole_eps) @ dagger(F)


def _edge_derivative(data: WeierstrassData, pole_eps: float, with_psi: bool):
    connection = ConnectionMatrix(data, pole_eps)
    kappa = data.df_integrand

    def deriv(z, y, dz):
        n = y.shape[0]
        f = y[:, 0]
        F = y[:, F_SLICE].reshape(n, 2, 2)
        out = np.empty_like(y)
        out[:, 0] = kappa.evaluate(z, pole_eps) * dz
        out[:, F_SLICE] = (F @ connection(z, f)).reshape(n, 4) * dz[:, None]
        if with_psi:
            x = psi_z_form(data, f, F, z, pole_eps) * dz[:, None, None]
            out[:, PSI_SLICE] = (x + dagger(x)).reshape(n, 4)
        return out

    return deriv


def _substeps(data: WeierstrassData, settings: Settings):
    connection = ConnectionMatrix(data, settings.tolerances.pole_eps)
    return substep_rule(
        lambda z, y: connection.norm(z, y[:, 0]), settings.min_substeps, settings.substep_norm_target
    )


def _initial_state(f0: complex, F0: np.ndarray, psi0: np.ndarray) -> np.ndarray:
    return np.concatenate([[f0], np.asarray(F0, dtype=complex).ravel(), np.asarray(psi0, dtype=complex).ravel()])


def _states(
    data: WeierstrassData,
    f: FField,
    settings: Settings,
    F0: Optional[np.ndarray],
    psi0: Optional[np.ndarray],
    prefer: str,
    with_psi: bool,
) -> np.ndarray:
    grid = f.grid
    i0, j0 = grid.base_index
    F0 = np.eye(2, dtype=complex) if F0 is None else np.asarray(F0, dtype=complex)
    psi0 = np.zeros((2, 2), dtype=complex) if psi0 is None else np.asarray(psi0, dtype=complex)
    state = _initial_state(f.values[i0, j0], F0, psi0)
    if not with_psi:
        state = state[:5]
    deriv = _edge_derivative(data, settings.tolerances.pole_eps, with_psi)
    return transport(grid, grid.spanning_tree(prefer), state, deriv, _substeps(data, settings))


def _check_det(F: np.ndarray, grid: DomainGrid, tol_det: float) -> float:
    drift = np.abs(det2(F) - 1)
    worst = float(np.nanmax(drift, initial=0.0))
    if worst > tol_det:
        i, j = np.unravel_index(int(np.nanargmax(drift)), drift.shape)
        raise DetDrift(f"|det F - 1| = {worst:.3e} exceeds {tol_det:g}", node=complex(grid.nodes[i, j]), drift=worst)
    return worst


def integrate_F(
    data: WeierstrassData,
    f: FField,
    settings: Optional[Settings] = None,
    F0: Optional[np.ndarray] = None,
    prefer: str = "x",
) -> np.ndarray:
    """Frame samples of shape (nx, ny, 2, 2), NaN on masked nodes"""
    settings = settings or get_settings()
    states = _states(data, f, settings, F0, None, prefer, with_psi=False)
    F = states[:, F_SLICE].reshape(f.grid.shape + (2, 2))
    _check_det(F, f.grid, settings.tolerances.tol_det)
    return F


def integrate_psi(
    data: WeierstrassData,
    f: FField,
    F: np.ndarray,
    base: Optional[np.ndarray] = None,
    settings: Optional[Settings] = None,
    prefer: str = "x",
) -> np.ndarray:
    """Immersion samples (nx, ny, 2, 2), Hermitian, with psi(z0) = base"""
    settings = settings or get_settings()
    i0, j0 = f.grid.base_index
    states = _states(data, f, settings, F[i0, j0], base, prefer, with_psi=True)
    psi = states[:, PSI_SLICE].reshape(f.grid.shape + (2, 2))
    return 0.5 * (psi + dagger(psi))


@dataclass(frozen=True, eq=False)
class FrameField:
    grid: DomainGrid
    F: np.ndarray
    psi: np.ndarray
    f: np.ndarray
    base: np.ndarray
    det_drift: float
    loop_residual: float
    path_residual: float

    @cached_property
    def Omega(self) -> np.ndarray:
        inv = inv2(self.F)
        omega = inv @ self.psi @ dagger(inv)
        return 0.5 * (omega + dagger(omega))


def build_frame_field(
    derived: DerivedData,
    settings: Optional[Settings] = None,
    base: Optional[np.ndarray] = None,
    F0: Optional[np.ndarray] = None,
    check_paths: bool = True,
) -> FrameField:
    """Integrate F and psi jointly and verify det, cell closure and path independence"""
    settings = settings or get_settings()
    tol = settings.tolerances
    data, f = derived.data, derived.f
    if derived.flat:
        raise FlatData("Hopf density vanishes; the surface lies in a degenerate hyperplane")
    grid = f.grid
    grid.check_topology()
    base = np.zeros((2, 2), dtype=complex) if base is None else np.asarray(base, dtype=complex)

    states = _states(data, f, settings, F0, base, "x", with_psi=True)
    F = states[:, F_SLICE].reshape(grid.shape + (2, 2))
    psi = states[:, PSI_SLICE].reshape(grid.shape + (2, 2))
    drift = _check_det(F, grid, tol.tol_det)

    scale = max(1.0, float(np.nanmax(np.abs(states[:, 1:]), initial=0.0)))
    deriv = _edge_derivative(data, tol.pole_eps, with_psi=True)
    cells = cell_loop_residual(grid, states, deriv, _substeps(data, settings), components=slice(1, 9))
    normalized = cells / (2 * (grid.hx + grid.hy) * scale)
    loop = float(np.nanmax(normalized, initial=0.0))
    if loop > tol.tol_loop:
        i, j = np.unravel_index(int(np.nanargmax(normalized)), normalized.shape)
        raise LoopClosureFailure(
            "Frame does not close around a grid cell",
            location=complex(grid.nodes[i, j] + 0.5 * (grid.hx + 1j * grid.hy)),
            residual=loop,
        )

    path = 0.0
    if check_paths:
        other = _states(data, f, settings, F0, base, "y", with_psi=True)
        path = float(np.nanmax(np.abs(other[:, 1:] - states[:, 1:]), initial=0.0)) / scale
        if path > tol.tol_path:
            raise LoopClosureFailure(
                f"Spanning trees disagree by {path:.3e}", residual=path, tolerance=tol.tol_path
            )
    logger.info(f"Frame integrated: det drift {drift:.2e}, loop {loop:.2e}, path {path:.2e}")
    return FrameField(
        grid=grid,
        F=F,
        psi=0.5 * (psi + dagger(psi)),
        f=states[:, 0].reshape(grid.shape),
        base=base,
        det_drift=drift,
        loop_residual=loop,
        path_residual=path,
    )


@dataclass(frozen=True, eq=False)
class OmegaResult:
    Omega: np.ndarray
    pde_residual: float
    mixed_partials_residual: float


def recover_Omega(
    data: WeierstrassData, frame: FrameField, settings: Optional[Settings] = None
) -> OmegaResult:
    """Omega = F^-1 psi F^-*, with the residual of Omega_z + A Omega = M by finite differences"""
    settings = settings or get_settings()
    tol = settings.tolerances
    grid = frame.grid
    det_error = float(np.nanmax(np.abs(det2(frame.F) - 1), initial=0.0))
    if det_error > tol.tol_det:
        raise SingularFrame(f"Frame determinant drifted by {det_error:.3e}", drift=det_error)
    omega = frame.Omega
    active = grid.active
    z = grid.nodes[active]
    A = np.full(grid.shape + (2, 2), np.nan, dtype=complex)
    M = np.full(grid.shape + (2, 2), np.nan, dtype=complex)
    A[active] = ConnectionMatrix(data, tol.pole_eps)(z, frame.f[active])
    M[active] = _source(data, frame.f[active], z, tol.pole_eps)
    residual = GridCalculus(omega, grid, settings.fd_order).dz + A @ omega - M
    scale = max(1.0, finite_max(np.abs(M), "source term"))
    pde = finite_max(np.abs(residual), "Omega structure equation") / scale

    phi = np.full(grid.shape + (2, 2), np.nan, dtype=complex)
    phi[active] = psi_z_form(data, frame.f[active], frame.F[active], z, tol.pole_eps)
    mixed = GridCalculus(phi, grid, settings.fd_order).dzbar - GridCalculus(dagger(phi), grid, settings.fd_order).dz
    mixed_residual = finite_max(np.abs(mixed), "mixed partials") / max(1.0, finite_max(np.abs(phi), "phi"))
    return OmegaResult(omega, pde, mixed_residual)


@dataclass(frozen=True)
class SecondOrderReport:
    ode_residual: float
    wronskian_residual: float


def second_order_check(
    data: WeierstrassData, f: np.ndarray, F: np.ndarray, grid: DomainGrid, settings: Optional[Settings] = None
) -> SecondOrderReport:
    """
    The first column (C, D) of F solves u Z'' - u' Z' - (a + eps conj(c) g) q u Z = 0
    with u = g'/f, and C D' - D C' = u.
    """
    settings = settings or get_settings()
    pole_eps = settings.tolerances.pole_eps
    active = grid.active
    z = grid.nodes[active]

    def sampled(values):
        out = np.full(grid.shape, np.nan, dtype=complex)
        out[active] = values
        return out

    fv = f[active]
    dg = data.dg.evaluate(z, pole_eps)
    u = sampled(dg / fv)
    du = sampled((data.ddg.evaluate(z, pole_eps) * fv - dg * data.df_integrand.evaluate(z, pole_eps)) / fv**2)
    ru = sampled(data.theta.evaluate(z, pole_eps) * (dg / fv) ** 2)

    worst = 0.0
    derivatives = {}
    for name, column in (("C", F[..., 0, 0]), ("D", F[..., 1, 0])):
        d1 = holomorphic_derivative(column, grid, settings.fd_order)
        d2 = holomorphic_derivative(column, grid, settings.fd_order, order=2)
        derivatives[name] = d1
        terms = (u * d2, du * d1, ru * column)
        residual = np.abs(terms[0] - terms[1] - terms[2]) / (1 + sum(np.abs(t) for t in terms))
        worst = max(worst, finite_max(residual, f"second-order equation for {name}"))
    wronskian = F[..., 0, 0] * derivatives["D"] - F[..., 1, 0] * derivatives["C"]
    wr = finite_max(np.abs(wronskian - u) / (1 + np.abs(u)), "Wronskian")
    return SecondOrderReport(worst, wr)
