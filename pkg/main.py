import logging
from typing import Optional

import typer
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from app.core.config import get_settings
from app.core.errors import SurfaceError
from app.models.schemas import Pipeline, SurfaceReport
from app.services.pipeline_service import load_job_config, run_job

app = typer.Typer(name="bryant4", help="Marginally trapped surfaces of Bryant type in Minkowski 4-space")
console = Console()

CONFIG_OPTION = typer.Option(None, "--config", "-c", help="YAML job configuration")
OUT_OPTION = typer.Option(None, "--out", "-o", help="Output directory for report, mesh and CSV")
TOL_SCALE_OPTION = typer.Option(None, "--tol-scale", help="Multiply every verification tolerance")
GRID_N_OPTION = typer.Option(None, "--grid-n", help="Nodes along the real axis")


def setup_logging(level: Optional[str] = None):
    logging.basicConfig(
        level=(level or get_settings().log_level).upper(),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(console=Console(stderr=True), rich_tracebacks=True)],
        force=True,
    )


def print_report(report: SurfaceReport):
    if report.entries:
        table = Table(title=f"{report.pipeline.value} residuals")
        table.add_column("check")
        table.add_column("residual", justify="right")
        table.add_column("tolerance", justify="right")
        table.add_column("status")
        for entry in report.entries:
            status = "[green]ok[/green]" if entry.passed else "[red]FAIL[/red]"
            table.add_row(entry.name, f"{entry.value:.3e}", f"{entry.tolerance:.1e}", status)
        console.print(table)
    for key in sorted(report.info):
        console.print(f"{key} = {report.info[key]}")
    if report.error is not None:
        console.print(f"[red]error[/red] {report.error['code']}: {report.error['message']}")
        for key, value in report.error.get("details", {}).items():
            console.print(f"  {key} = {value}")
    console.print(f"exit code {report.exit_code}")


def _run(pipeline: Pipeline, config: Optional[str], out: Optional[str], tol_scale: Optional[float], grid_n: Optional[int]):
    setup_logging()
    try:
        job = load_job_config(config, {"pipeline": pipeline, "tol_scale": tol_scale, "grid_n": grid_n})
    except SurfaceError as e:
        print_report(SurfaceReport(pipeline=pipeline, exit_code=e.exit_code, error=e.to_dict()))
        raise typer.Exit(e.exit_code)
    outcome = run_job(job, out)
    print_report(outcome.report)
    for artifact in outcome.artifacts:
        console.print(f"wrote {artifact}")
    raise typer.Exit(outcome.exit_code)


@app.command()
def generate(
    config: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    tol_scale: Optional[float] = TOL_SCALE_OPTION,
    grid_n: Optional[int] = GRID_N_OPTION,
):
    """Construct the surface and export its mesh"""
    _run(Pipeline.GENERATE, config, out, tol_scale, grid_n)


@app.command()
def verify(
    config: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    tol_scale: Optional[float] = TOL_SCALE_OPTION,
    grid_n: Optional[int] = GRID_N_OPTION,
):
    """Construct the surface and run every geometric check"""
    _run(Pipeline.VERIFY, config, out, tol_scale, grid_n)


@app.command()
def limits(
    config: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    tol_scale: Optional[float] = TOL_SCALE_OPTION,
    grid_n: Optional[int] = GRID_N_OPTION,
):
    """Compare against the closed forms of the classical cases"""
    _run(Pipeline.LIMITS, config, out, tol_scale, grid_n)


@app.command()
def deform(
    config: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    tol_scale: Optional[float] = TOL_SCALE_OPTION,
    grid_n: Optional[int] = GRID_N_OPTION,
):
    """Sweep r towards 0 and check the limit surface"""
    _run(Pipeline.DEFORM, config, out, tol_scale, grid_n)


@app.command()
def classify(
    config: Optional[str] = CONFIG_OPTION,
    out: Optional[str] = OUT_OPTION,
    tol_scale: Optional[float] = TOL_SCALE_OPTION,
    grid_n: Optional[int] = GRID_N_OPTION,
):
    """Finite total curvature verdict and screens for rational data"""
    _run(Pipeline.CLASSIFY, config, out, tol_scale, grid_n)


@app.command()
def serve(
    host: Optional[str] = typer.Option(None, help="Bind address"),
    port: Optional[int] = typer.Option(None, help="Port, random free port when unset"),
):
    """Start the HTTP API"""
    setup_logging()
    from server import start_server

    start_server(host, port)


if __name__ == "__main__":
    app()
