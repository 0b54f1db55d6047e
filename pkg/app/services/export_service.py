"""
Mesh, report and CSV writers
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from app.core.errors import ProjectionInvalid
from app.models.schemas import MeshFormat, Projection, SurfaceReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class MeshOutput:
    vertices: np.ndarray  # (n, 3)
    faces: np.ndarray  # (m, 4), zero-based
    scalars: Dict[str, np.ndarray] = field(default_factory=dict)
    header: Dict[str, str] = field(default_factory=dict)


def _format(value: float) -> str:
    return f"{value:.12e}" if np.isfinite(value) else "nan"


class ExportService:
    """Deterministic writers for job artifacts"""

    def project(
        self,
        components: np.ndarray,
        projection: Projection,
        r: Optional[float] = None,
        tol_geo: float = 1e-5,
    ) -> np.ndarray:
        """Map (..., 4) spacetime coordinates to (..., 3)"""
        if projection == Projection.DROP_X0:
            return components[..., 1:]
        if projection == Projection.DROP_X3:
            return components[..., :3]
        if r is None or r <= 0:
            raise ProjectionInvalid("The ball projection needs the curvature parameter r > 0")
        x0 = components[..., 0]
        spatial = components[..., 1:]
        finite = np.all(np.isfinite(components), axis=-1)
        quadric = (np.sum(spatial**2, axis=-1) - x0**2) * r**2 + 1
        bad = finite & ((np.abs(quadric) > tol_geo) | (x0 <= 0))
        if bad.any():
            raise ProjectionInvalid(
                "The surface does not lie in the upper sheet of the hyperboloid -<x,x> = 1/r^2",
                r=r,
                residual=float(np.abs(quadric[finite]).max()),
            )
        return r * spatial / (1 + r * x0)[..., None]

    def build_mesh(
        self,
        components: np.ndarray,
        projection: Projection,
        r: Optional[float] = None,
        scalars: Optional[Dict[str, np.ndarray]] = None,
        tol_geo: float = 1e-5,
    ) -> MeshOutput:
        """Quads over grid cells whose four corners are finite; other nodes are dropped and re-indexed"""
        nx, ny = components.shape[:2]
        keep = np.all(np.isfinite(components), axis=-1)
        index = np.full((nx, ny), -1, dtype=int)
        index[keep] = np.arange(int(keep.sum()))
        vertices = self.project(components, projection, r, tol_geo)[keep]

        quad = keep[:-1, :-1] & keep[1:, :-1] & keep[1:, 1:] & keep[:-1, 1:]
        ci, cj = np.nonzero(quad)
        faces = np.stack(
            [index[ci, cj], index[ci + 1, cj], index[ci + 1, cj + 1], index[ci, cj + 1]], axis=-1
        ).reshape(-1, 4)

        channels = {name: np.asarray(values, dtype=float)[keep] for name, values in (scalars or {}).items()}
        header = {"projection": projection.value}
        if projection == Projection.POINCARE_BALL:
            header["ball_map"] = f"y = r * (x1, x2, x3) / (1 + r * x0), r = {r!r}"
        return MeshOutput(vertices, faces, channels, header)

    def write_obj(self, mesh: MeshOutput, path: Path) -> Path:
        with open(path, "w", encoding="utf-8") as file:
            file.write("# bryant4 surface mesh\n")
            for key, value in mesh.header.items():
                file.write(f"# {key} = {value}\n")
            for name in mesh.scalars:
                file.write(f"# scalar channel {name} written to the PLY variant\n")
            for v in mesh.vertices:
                file.write(f"v {_format(v[0])} {_format(v[1])} {_format(v[2])}\n")
            for f in mesh.faces + 1:
                file.write(f"f {f[0]} {f[1]} {f[2]} {f[3]}\n")
        return path

    def write_ply(self, mesh: MeshOutput, path: Path) -> Path:
        names = list(mesh.scalars)
        with open(path, "w", encoding="utf-8") as file:
            file.write("ply\nformat ascii 1.0\n")
            for key, value in mesh.header.items():
                file.write(f"comment {key} = {value}\n")
            file.write(f"element vertex {len(mesh.vertices)}\n")
            file.write("property double x\nproperty double y\nproperty double z\n")
            for name in names:
                file.write(f"property double {name}\n")
            file.write(f"element face {len(mesh.faces)}\n")
            file.write("property list uchar int vertex_indices\nend_header\n")
            for k, v in enumerate(mesh.vertices):
                row = [_format(x) for x in v] + [_format(mesh.scalars[name][k]) for name in names]
                file.write(" ".join(row) + "\n")
            for f in mesh.faces:
                file.write(f"4 {f[0]} {f[1]} {f[2]} {f[3]}\n")
        return path

    def export_mesh(
        self,
        components: np.ndarray,
        path: Path,
        projection: Projection,
        fmt: MeshFormat = MeshFormat.OBJ,
        r: Optional[float] = None,
        scalars: Optional[Dict[str, np.ndarray]] = None,
        tol_geo: float = 1e-5,
    ) -> MeshOutput:
        mesh = self.build_mesh(components, projection, r, scalars, tol_geo)
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if fmt == MeshFormat.PLY:
            self.write_ply(mesh, path)
        else:
            self.write_obj(mesh, path)
        logger.info(f"Mesh with {len(mesh.vertices)} vertices and {len(mesh.faces)} faces written to {path}")
        return mesh

    def report_lines(self, report: SurfaceReport) -> List[str]:
        """key = value lines in a stable order; no timestamps"""
        lines = [
            f"pipeline = {report.pipeline.value}",
            f"exit_code = {report.exit_code}",
            f"passed = {str(report.passed).lower()}",
        ]
        for key in sorted(report.info):
            lines.append(f"info.{key} = {report.info[key]}")
        for entry in report.entries:
            lines.append(f"residual.{entry.name} = {_format(entry.value)}")
            lines.append(f"tolerance.{entry.name} = {_format(entry.tolerance)}")
            lines.append(f"passed.{entry.name} = {str(entry.passed).lower()}")
        if report.error is not None:
            lines.append(f"error.code = {report.error['code']}")
            lines.append(f"error.message = {report.error['message']}")
            for key, value in report.error.get("details", {}).items():
                lines.append(f"error.details.{key} = {value}")
        return lines

    def write_report(self, report: SurfaceReport, path: Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(self.report_lines(report)) + "\n", encoding="utf-8")
        logger.info(f"Report written to {path}")
        return path

    def write_csv(self, path: Path, header: Sequence[str], rows: Sequence[Sequence[float]]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, np.asarray(rows, dtype=float), delimiter=",", header=",".join(header), comments="", fmt="%.12e")
        return path


# Global export service instance
export_service = ExportService()
