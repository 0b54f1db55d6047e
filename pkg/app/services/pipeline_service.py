"""
Job orchestration: builds the data from a JobConfig, runs the selected
pipeline and collects residuals, verdicts and artifacts.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import yaml
from pydantic import ValidationError

from app.core.config import Settings, get_settings
from app.core.errors import ConfigError, FlatData, InvalidData, SurfaceError
from app.geometry.classifier import (
    RationalData,
    completeness_screen,
    ftc_classify,
    parallel_H_classify,
)
from app.geometry.frames import FrameField, build_frame_field, integrate_F, recover_Omega, second_order_check
from app.geometry.grid import DomainGrid, finite_max
from app.geometry.limits import (
    LimitCase,
    LimitKind,
    bryant_null_curve,
    c_zero_family,
    cmc_omega,
    deformation_family,
    detect_limit_case,
    integral_frame,
    weierstrass_closed_form,
)
from app.geometry.lorentz import bilinear, euclid_norm2, to_components
from app.geometry.parser import parse_expression
from app.geometry.verifiers import CheckResult, VerificationResult, verify_surface
from app.geometry.weierstrass import DerivedData, WeierstrassData, derive, pole_indicial_report
from app.models.schemas import ClassifyRequest, ClassifyResponse, JobConfig, Pipeline, Projection, SurfaceReport
from app.services.export_service import export_service

logger = logging.getLogger(__name__)

DEFAULT_CLASSIFY_GRID_N = 33


def complex_value(value, name: str) -> complex:
    """Numbers pass through; strings must parse to a constant expression"""
    if isinstance(value, (int, float, complex)):
        return complex(value)
    try:
        expr = parse_expression(str(value))
    except SurfaceError as e:
        raise ConfigError(f"{name}: {e.message}", field=name)
    if not expr.is_constant():
        raise ConfigError(f"{name} must be a constant, got '{value}'", field=name)
    return complex(expr.evaluate(0j))


def load_job_config(path: Optional[str], overrides: Optional[Dict[str, Any]] = None) -> JobConfig:
    """
    Read a flat YAML mapping and apply command-line overrides (None values are skipped).
    """
    document: Dict[str, Any] = {}
    if path is not None:
        try:
            with open(path, encoding="utf-8") as file:
                document = yaml.safe_load(file) or {}
        except OSError as e:
            raise ConfigError(f"Cannot read config file: {e}", path=str(path))
        except yaml.YAMLError as e:
            raise ConfigError(f"Invalid YAML: {e}", path=str(path))
        if not isinstance(document, dict):
            raise ConfigError("The config document must be a mapping", path=str(path))
    document.update({k: v for k, v in (overrides or {}).items() if v is not None})
    try:
        return JobConfig(**document)
    except ValidationError as e:
        problems = [f"{'.'.join(str(p) for p in err['loc'])}: {err['msg']}" for err in e.errors()]
        raise ConfigError("Invalid job configuration", problems=problems)


def _fmt(value: complex) -> str:
    value = complex(value)
    if value.imag == 0:
        return f"{value.real:.12g}"
    return f"{value.real:.12g}{value.imag:+.12g}i"


@dataclass
class JobOutcome:
    exit_code: int
    report: SurfaceReport
    artifacts: List[str] = field(default_factory=list)


@dataclass
class _Job:
    config: JobConfig
    data: WeierstrassData
    settings: Settings
    report: SurfaceReport
    out_dir: Optional[Path]
    artifacts: List[str] = field(default_factory=list)


class JobRunner:
    """Runs generate, verify, limits, deform and classify jobs"""

    def __init__(self, settings: Optional[Settings] = None):
        self._settings = settings

    @property
    def settings(self) -> Settings:
        return self._settings or get_settings()

    def job_settings(self, config: JobConfig) -> Settings:
        """Settings with the job's tolerance scale and overrides applied"""
        try:
            tolerances = self.settings.tolerances.scaled(config.tol_scale).merged(config.tolerances)
        except ValueError as e:
            raise ConfigError(str(e))
        return self.settings.model_copy(update={"tolerances": tolerances})

    def build_data(self, config: JobConfig) -> WeierstrassData:
        grid = DomainGrid.rectangle(
            config.x_min,
            config.x_max,
            config.y_min,
            config.y_max,
            config.grid_n,
            complex_value(config.z0, "z0"),
        )
        return WeierstrassData(
            g=parse_expression(config.g),
            w=parse_expression(config.w),
            eps=config.eps,
            grid=grid,
            a=config.a,
            b=config.b,
            c=complex_value(config.c, "c"),
            f0=complex_value(config.f0, "f0"),
        )

    def run(self, config: JobConfig, out_dir: Optional[str] = None) -> JobOutcome:
        """Run a job; failures become an error block with exit status 1 or 2"""
        report = SurfaceReport(pipeline=config.pipeline)
        target = out_dir or config.out_dir
        job = None
        try:
            settings = self.job_settings(config)
            job = _Job(config, self.build_data(config), settings, report, Path(target) if target else None)
            logger.info(f"Running {config.pipeline.value} job on a {config.grid_n}-node grid")
            pipelines = {
                Pipeline.GENERATE: self._generate,
                Pipeline.VERIFY: self._verify,
                Pipeline.LIMITS: self._limits,
                Pipeline.DEFORM: self._deform,
                Pipeline.CLASSIFY: self._classify,
            }
            pipelines[config.pipeline](job)
            report.exit_code = 0 if report.passed else 2
            for entry in report.entries:
                if not entry.passed:
                    logger.warning(f"Residual {entry.name} = {entry.value:.3e} exceeds {entry.tolerance:g}")
        except SurfaceError as e:
            logger.error(f"Job failed with {e.code}: {e.message}")
            report.error = e.to_dict()
            report.exit_code = e.exit_code

        artifacts = list(job.artifacts) if job else []
        if target:
            path = export_service.write_report(report, Path(target) / "report.txt")
            artifacts.append(str(path))
        return JobOutcome(report.exit_code, report, artifacts)

    # Shared construction

    def _add_checks(self, report: SurfaceReport, checks: List[CheckResult]):
        for check in checks:
            report.add(check.name, check.residual, check.tolerance)

    def _construct(self, job: _Job) -> Tuple[DerivedData, FrameField, Optional[LimitCase]]:
        data, settings, report = job.data, job.settings, job.report
        tol = settings.tolerances
        screen = completeness_screen(data, job.config.assert_complete)
        report.info["screen"] = screen.kind.value
        if screen.message:
            report.info["screen_message"] = screen.message
        if not screen.constructible:
            raise FlatData(screen.message)

        derived = derive(data, settings)
        case = detect_limit_case(data.eps, data.a, data.b, data.c, data.f0)
        base = None
        if case is not None and case.kind in (LimitKind.CMC_H3, LimitKind.CMC_S3):
            g0 = complex(data.g.evaluate(derived.grid.base_node, tol.pole_eps))
            base = cmc_omega(g0, data.eps, case.r)
        frame = build_frame_field(derived, settings, base=base)

        grid = derived.grid
        report.info["grid"] = f"{grid.nx}x{grid.ny}, h = {grid.h:.6g}"
        report.info["base_point"] = _fmt(grid.z0)
        report.info["masked_nodes"] = str(int(grid.mask.sum()))
        report.info["limit_case"] = case.kind.value if case else "none"
        report.info["c1_min_margin"] = f"{derived.c1.min_margin:.6e}"
        report.info["c2_max_q"] = f"{derived.c2.max_q:.6e}"
        report.info["parallel_H"] = parallel_H_classify(derived.f, derived.data, settings).kind.value
        report.add("det_drift", frame.det_drift, tol.tol_det)
        report.add("loop_closure", frame.loop_residual, tol.tol_loop)
        report.add("path_independence", frame.path_residual, tol.tol_path)

        if case is not None and case.kind in (LimitKind.MINIMAL_R3, LimitKind.MAXIMAL_L3):
            i0, j0 = grid.base_index
            oracle = weierstrass_closed_form(
                data.g,
                data.w,
                data.eps,
                grid,
                settings=settings,
                g0=complex(data.g.evaluate(grid.base_node, tol.pole_eps)),
                f0=complex(frame.f[i0, j0]),
            )
            difference = np.sqrt(np.sum((to_components(frame.psi).real - oracle.components) ** 2, axis=-1))
            report.add("weierstrass_oracle", finite_max(difference, "oracle difference"), tol.tol_oracle)
        return derived, frame, case

    def _export(self, job: _Job, derived: DerivedData, frame: FrameField, case: Optional[LimitCase], verification=None):
        config = job.config
        if job.out_dir is None or not config.mesh:
            return
        projection = config.projection
        if projection is None:
            if case is not None and case.kind == LimitKind.CMC_H3:
                projection = Projection.POINCARE_BALL
            else:
                projection = Projection.DROP_X0 if derived.data.eps == -1 else Projection.DROP_X3
        r = case.r if case is not None and case.r is not None else config.r
        scalars = {"abs_g": np.abs(derived.data.on_grid(derived.data.g, job.settings.tolerances.pole_eps))}
        if verification is not None:
            H = verification.sample.H
            floor = np.maximum(euclid_norm2(H), verification.sample.lam**-2.0)
            scalars["K"] = verification.sample.K.real
            scalars["H_residual"] = np.abs(bilinear(H, H).real) / floor
        path = job.out_dir / f"surface.{config.mesh_format.value}"
        export_service.export_mesh(
            to_components(frame.psi).real,
            path,
            projection,
            config.mesh_format,
            r=r,
            scalars=scalars,
            tol_geo=job.settings.tolerances.tol_geo,
        )
        job.artifacts.append(str(path))
        job.report.info["projection"] = projection.value

    # Pipelines

    def _generate(self, job: _Job):
        derived, frame, case = self._construct(job)
        self._export(job, derived, frame, case)

    def _verify(self, job: _Job):
        derived, frame, case = self._construct(job)
        settings, report = job.settings, job.report
        tol = settings.tolerances
        verification: VerificationResult = verify_surface(derived, frame, settings)
        self._add_checks(report, verification.checks)

        omega = recover_Omega(derived.data, frame, settings)
        report.add("omega_structure_equation", omega.pde_residual, tol.tol_pde)
        report.add("mixed_partials", omega.mixed_partials_residual, tol.tol_pde)
        second = second_order_check(derived.data, frame.f, frame.F, frame.grid, settings)
        report.add("second_order_ode", second.ode_residual, tol.tol_ode)
        report.add("wronskian", second.wronskian_residual, tol.tol_wronskian)

        for k, entry in enumerate(pole_indicial_report(derived.data, derived.f)):
            report.info[f"indicial.{k}"] = (
                f"pole {_fmt(entry.pole)}, k = {entry.k}, delta = {entry.delta}, "
                f"roots = {entry.roots}, consistent = {str(entry.consistent).lower()}"
            )
        self._export(job, derived, frame, case, verification)

    def _limits(self, job: _Job):
        data, settings, report = job.data, job.settings, job.report
        tol = settings.tolerances
        case = detect_limit_case(data.eps, data.a, data.b, data.c, data.f0)
        if case is None:
            if data.c != 0:
                raise InvalidData("The constants match no classical case and c is not zero")
            family = c_zero_family(data.g, data.w, data.eps, data.a, data.b, data.f0, data.grid, settings)
            report.info["limit_case"] = "c_zero_family"
            report.info["parallel_H"] = str(family.parallel_H).lower()
            report.info["min_abs_f"] = f"{float(np.nanmin(np.abs(family.f.values))):.6e}"
            derived = derive(data, settings)
            if data.a == 0:
                F = integrate_F(derived.data, derived.f, settings)
                Fi = integral_frame(derived.data, derived.f, settings)
                report.add("integral_frame", finite_max(np.abs(F - Fi), "integral frame"), tol.tol_oracle)
            frame = build_frame_field(derived, settings)
            report.add("det_drift", frame.det_drift, tol.tol_det)
            report.add("loop_closure", frame.loop_residual, tol.tol_loop)
            report.add("path_independence", frame.path_residual, tol.tol_path)
            # f from edge quadrature of g omega against f carried by the frame transport
            f_difference = np.abs(frame.f - family.f.values) / (1 + np.abs(family.f.values))
            report.add("c_zero_f", finite_max(f_difference, "f difference"), tol.tol_oracle)
            return

        derived, frame, case = self._construct(job)
        if case.kind in (LimitKind.CMC_H3, LimitKind.CMC_S3):
            curve = bryant_null_curve(data.g, data.w, data.eps, case.r, data.grid, settings)
            self._add_checks(report, curve.checks)
        self._export(job, derived, frame, case)

    def _deform(self, job: _Job):
        data, config, settings, report = job.data, job.config, job.settings, job.report
        family = deformation_family(
            data.g, data.w, data.eps, data.grid, config.r_list, settings, config.extrapolation_levels
        )
        self._add_checks(report, family.checks)
        report.info["slope"] = f"{family.slope:.6f}"
        report.info["r_values"] = ", ".join(f"{r:g}" for r in family.r_values)
        if job.out_dir is not None:
            path = export_service.write_csv(job.out_dir / "deformation.csv", ("r", "sup_difference", "slope"), family.rows())
            job.artifacts.append(str(path))

    def _classify(self, job: _Job):
        data, settings, report = job.data, job.settings, job.report
        response = self.classify_data(data, job.config.assert_complete, settings)
        report.info["ftc_verdict"] = response.label
        if response.cause:
            report.info["ftc_cause"] = response.cause
        report.info["normalization_applied"] = str(response.normalization_applied).lower()
        report.info["screen"] = response.screen
        if response.screen_message:
            report.info["screen_message"] = response.screen_message
        report.info["parallel_H"] = response.parallel_H

    # Classification without a job

    def classify_data(
        self, data: WeierstrassData, assert_complete: bool = False, settings: Optional[Settings] = None
    ) -> ClassifyResponse:
        settings = settings or self.settings
        tol = settings.tolerances
        verdict = ftc_classify(RationalData.from_weierstrass(data, tol.coprime_eps), tol.tol_division)
        screen = completeness_screen(data, assert_complete)
        try:
            derived = derive(data, settings)
            parallel = parallel_H_classify(derived.f, derived.data, settings).kind.value
        except SurfaceError as e:
            logger.warning(f"Parallel mean curvature check skipped: {e.message}")
            parallel = f"unavailable ({e.code})"
        return ClassifyResponse(
            label=verdict.label,
            admissible=verdict.admissible,
            reason=verdict.reason.value if verdict.reason else None,
            cause=verdict.cause,
            normalization_applied=verdict.normalization.applied,
            screen=screen.kind.value,
            screen_message=screen.message,
            parallel_H=parallel,
        )

    def classify_request(self, request: ClassifyRequest) -> ClassifyResponse:
        grid = DomainGrid.rectangle(-0.5, 0.5, -0.5, 0.5, DEFAULT_CLASSIFY_GRID_N, 0j)
        data = WeierstrassData(
            g=parse_expression(request.g),
            w=parse_expression(request.w),
            eps=request.eps,
            grid=grid,
            a=request.a,
            b=request.b,
            c=complex_value(request.c, "c"),
        )
        return self.classify_data(data, request.assert_complete)


def run_job(config: JobConfig, out_dir: Optional[str] = None, settings: Optional[Settings] = None) -> JobOutcome:
    """Run a single job"""
    return JobRunner(settings).run(config, out_dir)


# Global job runner instance
job_runner = JobRunner()
