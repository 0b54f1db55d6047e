"""
Independent verification of the constructed immersion.

Every check differentiates the sampled psi (or F) on the grid and compares
against the closed formulas of the Weierstrass data. Results are CheckResult
entries; nothing here raises on a failed residual except the frame extraction
and the decomposition solver.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.core.config import Settings, get_settings
from app.core.errors import DependentInputs, FrameDegeneracy, InvalidData, RealityViolated
from app.geometry.frames import FrameField
from app.geometry.grid import GridCalculus, finite_max, holomorphic_derivative
from app.geometry.lorentz import bilinear, euclid_norm2, from_components, minkowski_metric, to_components
from app.geometry.weierstrass import DerivedData, WeierstrassData

logger = logging.getLogger(__name__)

# Below this |g'| or |G'| the Schwarzian and Small checks skip the node
DERIVATIVE_FLOOR = 1e-8


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.residual)) and self.residual <= self.tolerance


class _Samples:
    """Closed-form quantities of the data on the unmasked nodes of a frame"""

    def __init__(self, data: WeierstrassData, frame: FrameField, pole_eps: float):
        self.data = data
        self.frame = frame
        self.grid = frame.grid
        self.pole_eps = pole_eps

    def _grid(self, expr) -> np.ndarray:
        return self.grid.sample(lambda z: expr.evaluate(z, self.pole_eps))

    @cached_property
    def g(self):
        return self._grid(self.data.g)

    @cached_property
    def w(self):
        return self._grid(self.data.w)

    @cached_property
    def dg(self):
        return self._grid(self.data.dg)

    @cached_property
    def f(self):
        return self.frame.f

    @cached_property
    def q(self):
        return self.w * self.dg / self.f

    @cached_property
    def margin(self):
        return 1 - self.data.eps * np.abs(self.g) ** 2

    @cached_property
    def lam(self):
        return self.margin**2 * np.abs(self.w) ** 2

    @cached_property
    def mean_curvature_ratio(self):
        d = self.data
        top = d.a + d.b * np.abs(self.g) ** 2 + 2 * d.eps * np.real(np.conj(d.c) * self.g)
        return top / self.margin

    @cached_property
    def N(self):
        c = self.frame.F[..., :, 0]
        rho = 2 / self.margin
        return rho[..., None, None] * (c[..., :, None] * np.conj(c[..., None, :]))


@dataclass(frozen=True, eq=False)
class SurfaceDifferentials:
    psi_x: np.ndarray
    psi_y: np.ndarray
    psi_z: np.ndarray
    psi_zbar: np.ndarray
    psi_zz: np.ndarray
    psi_zzbar: np.ndarray
    lam: np.ndarray

    @classmethod
    def from_frame(cls, frame: FrameField, accuracy: int = 6) -> "SurfaceDifferentials":
        calc = GridCalculus(frame.psi, frame.grid, accuracy)
        lam = 2 * np.real(bilinear(calc.dz, calc.dzbar))
        return cls(calc.dx, calc.dy, calc.dz, calc.dzbar, calc.dzz, calc.dz_dzbar, lam)


@dataclass(frozen=True, eq=False)
class NormalFrame:
    N: np.ndarray
    M: np.ndarray
    cond: float

    @property
    def eta(self) -> np.ndarray:
        return 0.5 * (self.N + self.M)

    @property
    def eta_tilde(self) -> np.ndarray:
        return 0.5 * (self.N - self.M)


def normal_frame(samples: _Samples, diff: SurfaceDifferentials, cond_max: float = 1e8) -> NormalFrame:
    """
    N from the frame, M the null normal with <M, N> = 2.

    M is the minimum-norm solution of <M, psi_x> = <M, psi_y> = 0, <M, N> = 2,
    shifted along N to be null.
    """
    N = samples.N
    shape = N.shape[:-2]
    metric = minkowski_metric()
    rows = np.stack(
        [
            to_components(diff.psi_x).real @ metric,
            to_components(diff.psi_y).real @ metric,
            to_components(N).real @ metric,
        ],
        axis=-2,
    )
    valid = np.all(np.isfinite(rows), axis=(-1, -2))
    M = np.full(shape + (2, 2), np.nan, dtype=complex)
    if not valid.any():
        return NormalFrame(N, M, float("nan"))
    A = rows[valid]
    cond = np.linalg.cond(A)
    worst = float(cond.max())
    if worst > cond_max:
        raise FrameDegeneracy(f"Normal frame system has condition number {worst:.3e}", cond=worst)
    rhs = np.array([0.0, 0.0, 2.0])
    gram = A @ np.swapaxes(A, -1, -2)
    y = np.linalg.solve(gram, np.broadcast_to(rhs[:, None], (A.shape[0], 3, 1)))[..., 0]
    x = np.einsum("nij,ni->nj", A, y)
    xp = x @ metric
    norm = np.einsum("ni,ni->n", x, xp)
    n_comp = to_components(N[valid]).real
    x = x - (norm / 4)[:, None] * n_comp
    M[valid] = from_components(x)
    return NormalFrame(N, M, worst)


def induced_metric_check(samples: _Samples, diff: SurfaceDifferentials, tol) -> List[CheckResult]:
    lam = diff.lam
    metric = np.abs(lam - samples.lam) / lam
    conformal = np.abs(bilinear(diff.psi_z, diff.psi_z)) / lam
    with np.errstate(divide="ignore", invalid="ignore"):
        cross = np.abs(samples.f * samples.q / samples.dg) ** 2 * samples.margin**2
        cross = np.where(np.abs(samples.dg) > DERIVATIVE_FLOOR, np.abs(cross - samples.lam) / samples.lam, np.nan)
    results = [
        CheckResult("metric", finite_max(metric, "metric"), tol.tol_geo),
        CheckResult("conformality", finite_max(conformal, "conformality"), tol.tol_geo),
    ]
    if np.isfinite(cross).any():
        results.append(CheckResult("metric_cross", finite_max(cross, "metric cross-check"), tol.tol_geo))
    return results


def mean_curvature_vector(diff: SurfaceDifferentials) -> np.ndarray:
    return (2 / diff.lam)[..., None, None] * diff.psi_zzbar


def mean_curvature_check(
    samples: _Samples, diff: SurfaceDifferentials, normal: NormalFrame, tol
) -> Tuple[np.ndarray, List[CheckResult]]:
    H = mean_curvature_vector(diff)
    hh = np.abs(bilinear(H, H).real)
    floor = np.maximum(euclid_norm2(H), diff.lam**-2.0)
    ratio = bilinear(H, normal.M).real / 2
    expected = samples.mean_curvature_ratio
    return H, [
        CheckResult("marginally_trapped", finite_max(hh / floor, "marginally trapped"), tol.tol_H),
        CheckResult(
            "mean_curvature_ratio",
            finite_max(np.abs(ratio - expected) / (1 + np.abs(expected)), "mean curvature ratio"),
            tol.tol_geo,
        ),
    ]


def gauss_curvature(diff: SurfaceDifferentials, grid, accuracy: int = 6) -> np.ndarray:
    """-(2/lambda) d_z d_zbar log(lambda) of the sampled metric"""
    with np.errstate(invalid="ignore", divide="ignore"):
        log_lam = np.log(diff.lam)
    return -(2 / diff.lam) * GridCalculus(log_lam, grid, accuracy).dz_dzbar


def gauss_curvature_check(
    samples: _Samples, diff: SurfaceDifferentials, accuracy: int, tol
) -> Tuple[np.ndarray, List[CheckResult]]:
    eps = samples.data.eps
    K_num = gauss_curvature(diff, samples.grid, accuracy)
    K = 4 * eps * np.abs(samples.dg) ** 2 / (samples.lam * samples.margin**2)
    K_fq = eps * 4 * np.abs(samples.f) ** 2 * np.abs(samples.q) ** 2 / samples.lam**2
    scale = 1 + np.abs(K)
    results = [
        CheckResult("gauss_curvature", finite_max(np.abs(K_num - K) / scale, "Gauss curvature"), tol.tol_K),
        CheckResult("gauss_curvature_fq", finite_max(np.abs(K_fq - K) / scale, "Gauss curvature"), tol.tol_K),
    ]
    tested = np.abs(K) > tol.K_floor
    if np.any(tested & np.isfinite(K_num)):
        wrong = np.where(tested, np.maximum(0.0, -eps * K_num) / np.abs(K), np.nan)
        results.append(CheckResult("gauss_curvature_sign", finite_max(wrong, "curvature sign"), tol.tol_K))
    return K_num, results


@dataclass(frozen=True, eq=False)
class GaussMap:
    G: np.ndarray
    at_infinity: np.ndarray


def hyperbolic_gauss_map(frame: FrameField) -> GaussMap:
    C, D = frame.F[..., 0, 0], frame.F[..., 1, 0]
    infinite = np.abs(C) < 1e-14 * np.maximum(1.0, np.abs(D))
    with np.errstate(divide="ignore", invalid="ignore"):
        G = np.where(infinite, complex(np.inf, 0), D / C)
    return GaussMap(G, infinite & frame.grid.active)


def hyperbolic_gauss_check(samples: _Samples, accuracy: int, tol) -> Tuple[GaussMap, List[CheckResult]]:
    N = samples.N
    null = np.abs(bilinear(N, N)) / euclid_norm2(N)
    Nz = GridCalculus(N, samples.grid, accuracy).dz
    size = euclid_norm2(Nz)
    conformal = np.where(size > 1e-24, np.abs(bilinear(Nz, Nz)) / size, np.nan)
    results = [CheckResult("gauss_map_null", finite_max(null, "Gauss map nullity"), tol.tol_geo)]
    if np.isfinite(conformal).any():
        results.append(CheckResult("gauss_map_conformal", finite_max(conformal, "Gauss map conformality"), tol.tol_geo))
    return hyperbolic_gauss_map(samples.frame), results


def hopf_check(samples: _Samples, diff: SurfaceDifferentials, accuracy: int, tol) -> Tuple[np.ndarray, List[CheckResult]]:
    """q from second derivatives: p~ - p = -<psi_zz, N>"""
    q_num = -bilinear(diff.psi_zz, samples.N)
    q = samples.q
    dzbar = GridCalculus(q_num, samples.grid, accuracy).dzbar
    scale = 1 + float(np.nanmax(np.abs(q), initial=0.0))
    return q_num, [
        CheckResult("hopf_density", finite_max(np.abs(q_num - q) / (1 + np.abs(q)), "Hopf density"), tol.tol_geo),
        CheckResult("hopf_holomorphy", finite_max(np.abs(dzbar) / scale, "Hopf holomorphy"), tol.tol_geo),
    ]


def _affine_schwarzian(
    data: WeierstrassData, samples: _Samples, G: np.ndarray
) -> Optional[Tuple[np.ndarray, np.ndarray]]:
    """
    On the minimal set the frame's Gauss map must equal (g - g(z0))/f(z0).
    Returns {g, z} from the symbolic derivatives together with the nodewise
    deviation of G from that affine image, or None off the minimal set.
    """
    if not (data.a == 0 and data.b == 0 and data.c == 0):
        return None
    grid, pe = samples.grid, samples.pole_eps
    i0, j0 = grid.base_index
    expected = (samples.g - data.g.evaluate(grid.base_node, pe)) / samples.f[i0, j0]
    deviation = np.abs(G - expected) / (1 + np.abs(expected))
    d1, d2 = data.dg, data.dg.derivative()
    d3 = d2.derivative()
    g1, g2, g3 = (grid.sample(lambda z, e=e: e.evaluate(z, pe)) for e in (d1, d2, d3))
    with np.errstate(divide="ignore", invalid="ignore"):
        S = np.where(np.abs(g1) > DERIVATIVE_FLOOR, g3 / g1 - 1.5 * (g2 / g1) ** 2, np.nan)
    return S, deviation


def schwarzian_rhs(samples: _Samples) -> np.ndarray:
    """P' - P^2/2 - 2R with P = g''/g' - f'/f and R = (a + eps conj(c) g) q"""
    data, grid, pe = samples.data, samples.grid, samples.pole_eps
    kappa = data.df_integrand
    values = {
        name: grid.sample(lambda z, e=e: e.evaluate(z, pe))
        for name, e in (
            ("g1", data.dg),
            ("g2", data.ddg),
            ("g3", data.ddg.derivative()),
            ("k", kappa),
            ("k1", kappa.derivative()),
            ("theta", data.theta),
        )
    }
    f = samples.f
    g1, g2, g3 = values["g1"], values["g2"], values["g3"]
    with np.errstate(divide="ignore", invalid="ignore"):
        P = g2 / g1 - values["k"] / f
        dP = (g3 / g1 - (g2 / g1) ** 2) - (values["k1"] / f - (values["k"] / f) ** 2)
        R = values["theta"] * g1 / f
        rhs = dP - 0.5 * P**2 - 2 * R
    return np.where(np.abs(g1) > DERIVATIVE_FLOOR, rhs, np.nan)


def schwarzian_check(samples: _Samples, gauss: GaussMap, accuracy: int, tol) -> Tuple[np.ndarray, List[CheckResult]]:
    rhs = schwarzian_rhs(samples)
    G = np.where(gauss.at_infinity, np.nan, gauss.G)
    affine = _affine_schwarzian(samples.data, samples, G)
    if affine is None:
        G1 = holomorphic_derivative(G, samples.grid, accuracy)
        G2 = holomorphic_derivative(G, samples.grid, accuracy, order=2)
        G3 = holomorphic_derivative(G2, samples.grid, accuracy)
        with np.errstate(divide="ignore", invalid="ignore"):
            S = np.where(np.abs(G1) > DERIVATIVE_FLOOR, G3 / G1 - 1.5 * (G2 / G1) ** 2, np.nan)
        residual = np.abs(S - rhs) / (1 + np.abs(S))
    else:
        S, deviation = affine
        # {G, z} = {g, z} holds only while G stays a Mobius image of g
        residual = np.fmax(np.abs(S - rhs) / (1 + np.abs(S)), deviation)
    return S, [CheckResult("schwarzian", finite_max(residual, "Schwarzian identity"), tol.tol_schwarz)]


def small_formula_check(samples: _Samples, gauss: GaussMap, accuracy: int, tol) -> List[CheckResult]:
    """C^2 = g'/(f G') and D = G C"""
    F = samples.frame.F
    C, D = F[..., 0, 0], F[..., 1, 0]
    G = np.where(gauss.at_infinity, np.nan, gauss.G)
    G1 = holomorphic_derivative(G, samples.grid, accuracy)
    with np.errstate(divide="ignore", invalid="ignore"):
        expected = np.where(np.abs(G1) > DERIVATIVE_FLOOR, samples.dg / (samples.f * G1), np.nan)
    square = np.abs(C**2 - expected) / (1 + np.abs(C) ** 2)
    second = np.abs(D - G * C) / (1 + np.abs(D))
    return [
        CheckResult("small_formula_C", finite_max(square, "Small formula"), tol.tol_geo),
        CheckResult("small_formula_D", finite_max(second, "Small formula"), tol.tol_geo),
    ]


@dataclass(frozen=True, eq=False)
class SecondFundamentalSample:
    lam: np.ndarray
    E: np.ndarray
    E_tilde: np.ndarray
    p: np.ndarray
    p_tilde: np.ndarray
    H: np.ndarray
    K: np.ndarray
    G: np.ndarray


def second_fundamental_samples(
    diff: SurfaceDifferentials, normal: NormalFrame, K: np.ndarray, gauss: GaussMap, tol
) -> Tuple[SecondFundamentalSample, List[CheckResult]]:
    E = bilinear(diff.psi_zzbar, normal.eta)
    E_tilde = -bilinear(diff.psi_zzbar, normal.eta_tilde)
    p = bilinear(diff.psi_zz, normal.eta)
    p_tilde = -bilinear(diff.psi_zz, normal.eta_tilde)
    scale = 1 + np.abs(E)
    sample = SecondFundamentalSample(
        diff.lam, E, E_tilde, p, p_tilde, mean_curvature_vector(diff), K, gauss.G
    )
    return sample, [
        CheckResult("E_equals_E_tilde", finite_max(np.abs(E - E_tilde) / scale, "E"), tol.tol_geo),
        CheckResult("E_real", finite_max(np.abs(E.imag) / scale, "E"), tol.tol_geo),
    ]


def codazzi_check(
    sample: SecondFundamentalSample, grid, accuracy: int, tol
) -> List[CheckResult]:
    """p_zbar = p~_zbar = lambda (E/lambda)_z and (log lambda)_zzbar = 2(|p|^2 - |p~|^2)/lambda"""
    lam = sample.lam
    rhs = lam * GridCalculus(sample.E / lam, grid, accuracy).dz
    scale = 1 + float(np.nanmax(np.abs(rhs), initial=0.0))
    p_bar = GridCalculus(sample.p, grid, accuracy).dzbar
    pt_bar = GridCalculus(sample.p_tilde, grid, accuracy).dzbar
    with np.errstate(invalid="ignore", divide="ignore"):
        lhs = GridCalculus(np.log(lam), grid, accuracy).dz_dzbar
    gauss = 2 * (np.abs(sample.p) ** 2 - np.abs(sample.p_tilde) ** 2) / lam
    return [
        CheckResult("codazzi_p", finite_max(np.abs(p_bar - rhs) / scale, "Codazzi"), tol.tol_pde),
        CheckResult("codazzi_p_tilde", finite_max(np.abs(pt_bar - rhs) / scale, "Codazzi"), tol.tol_pde),
        CheckResult(
            "gauss_ricci", finite_max(np.abs(lhs - gauss) / (1 + np.abs(lhs)), "Gauss equation"), tol.tol_pde
        ),
    ]


@dataclass(frozen=True)
class Decomposition:
    a: float
    b: float
    c: complex
    residual: float
    reality_residual: float
    decomposable: bool


def apen_decompose(
    f1: Sequence[complex],
    f2: Sequence[complex],
    f3: Sequence[complex],
    f4: Sequence[complex],
    strict: bool = True,
    tol_reality: float = 1e-9,
    cond_max: float = 1e8,
    fit_tol: float = 1e-8,
) -> Decomposition:
    """
    Fit f2 = a f1 + c f3 and f4 = conj(c) f1 + b f3 with real a, b.

    The inputs must satisfy Im(f1 conj(f2) + f3 conj(f4)) = 0; strict mode raises
    when they do not, otherwise the violation is reported.
    """
    f1, f2, f3, f4 = (np.asarray(v, dtype=complex).ravel() for v in (f1, f2, f3, f4))
    n = f1.size
    if n < 8 or not (f2.size == f3.size == f4.size == n):
        raise InvalidData(f"Need at least 8 samples of each function, got {n}")
    basis = np.stack([f1, f3], axis=1)
    cond = float(np.linalg.cond(basis))
    if not cond < cond_max:
        raise DependentInputs(f"f1 and f3 are linearly dependent (condition {cond:.3e})", cond=cond)

    # Unknowns (a, b, Re c, Im c)
    zeros = np.zeros(n)
    system = np.concatenate(
        [
            np.stack([f1.real, zeros, f3.real, -f3.imag], axis=1),
            np.stack([f1.imag, zeros, f3.imag, f3.real], axis=1),
            np.stack([zeros, f3.real, f1.real, f1.imag], axis=1),
            np.stack([zeros, f3.imag, f1.imag, -f1.real], axis=1),
        ]
    )
    rhs = np.concatenate([f2.real, f2.imag, f4.real, f4.imag])
    if not np.linalg.cond(system) < cond_max:
        raise DependentInputs("Decomposition system is ill-conditioned")
    solution, *_ = np.linalg.lstsq(system, rhs, rcond=None)
    a, b, cr, ci = (float(v) for v in solution)
    residual = float(np.abs(system @ solution - rhs).max())

    product = f1 * np.conj(f2) + f3 * np.conj(f4)
    reality = float(np.abs(product.imag).max() / (1 + np.abs(product).max()))
    if reality > tol_reality:
        if strict:
            raise RealityViolated(
                f"f1 conj(f2) + f3 conj(f4) is not real (residual {reality:.3e})", residual=reality
            )
        logger.warning(f"Reality condition violated by {reality:.3e}")
    scale = 1 + float(np.abs(rhs).max())
    decomposable = residual <= fit_tol * scale and reality <= tol_reality
    return Decomposition(a, b, complex(cr, ci), residual, reality, decomposable)


@dataclass(frozen=True, eq=False)
class VerificationResult:
    checks: List[CheckResult]
    sample: SecondFundamentalSample
    q_num: np.ndarray
    schwarzian: np.ndarray
    normal: NormalFrame
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def by_name(self, name: str) -> CheckResult:
        return next(c for c in self.checks if c.name == name)


def verify_surface(
    derived: DerivedData,
    frame: FrameField,
    settings: Optional[Settings] = None,
    include_codazzi: bool = True,
) -> VerificationResult:
    """Run every geometric check on a constructed frame"""
    settings = settings or get_settings()
    tol = settings.tolerances
    accuracy = settings.fd_order
    samples = _Samples(derived.data, frame, tol.pole_eps)
    diff = SurfaceDifferentials.from_frame(frame, accuracy)
    normal = normal_frame(samples, diff, tol.cond_max)

    checks: List[CheckResult] = []
    checks += induced_metric_check(samples, diff, tol)
    _, mean = mean_curvature_check(samples, diff, normal, tol)
    checks += mean
    K, curvature = gauss_curvature_check(samples, diff, accuracy, tol)
    checks += curvature
    gauss, gauss_checks = hyperbolic_gauss_check(samples, accuracy, tol)
    checks += gauss_checks
    q_num, hopf = hopf_check(samples, diff, accuracy, tol)
    checks += hopf
    S, schwarz = schwarzian_check(samples, gauss, accuracy, tol)
    checks += schwarz
    checks += small_formula_check(samples, gauss, accuracy, tol)
    sample, fundamental = second_fundamental_samples(diff, normal, K, gauss, tol)
    checks += fundamental
    if include_codazzi:
        checks += codazzi_check(sample, frame.grid, accuracy, tol)

    for check in checks:
        if not check.passed:
            logger.warning(f"Check {check.name} failed: {check.residual:.3e} > {check.tolerance:g}")
    return VerificationResult(checks, sample, q_num, S, normal)

