import numpy as np
import pytest

from app.core.errors import ProjectionInvalid
from app.models.schemas import MeshFormat, Pipeline, Projection, SurfaceReport
from app.services.export_service import export_service


def hyperboloid_points(r, n=5):
    s, t = np.meshgrid(np.linspace(-2, 2, n), np.linspace(-1, 1, n), indexing="ij")
    spatial = np.stack([np.sinh(s), np.cosh(s) * np.sinh(t), np.zeros_like(s)], axis=-1)
    x0 = np.sqrt(1 + np.sum(spatial**2, axis=-1))
    return np.concatenate([x0[..., None], spatial], axis=-1) / r


def plane(n=4):
    x, y = np.meshgrid(np.arange(n, dtype=float), np.arange(n, dtype=float), indexing="ij")
    return np.stack([np.zeros_like(x), x, y, x * y], axis=-1)


def test_drop_projections():
    X = plane()
    np.testing.assert_array_equal(export_service.project(X, Projection.DROP_X0), X[..., 1:])
    np.testing.assert_array_equal(export_service.project(X, Projection.DROP_X3), X[..., :3])


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_ball_projection_stays_inside(r):
    y = export_service.project(hyperboloid_points(r), Projection.POINCARE_BALL, r)
    assert np.all(np.linalg.norm(y, axis=-1) < 1)


def test_ball_projection_refuses_bad_input():
    X = hyperboloid_points(1.0)
    with pytest.raises(ProjectionInvalid):
        export_service.project(X, Projection.POINCARE_BALL)
    with pytest.raises(ProjectionInvalid):
        export_service.project(X, Projection.POINCARE_BALL, r=2.0)
    lower = X.copy()
    lower[..., 0] *= -1
    with pytest.raises(ProjectionInvalid):
        export_service.project(lower, Projection.POINCARE_BALL, r=1.0)


def test_mesh_drops_masked_nodes():
    X = plane()
    X[1, 1] = np.nan
    mesh = export_service.build_mesh(X, Projection.DROP_X0, scalars={"K": np.ones((4, 4))})
    assert mesh.vertices.shape == (15, 3)
    # the four cells around the masked node are gone
    assert mesh.faces.shape == (5, 4)
    assert mesh.faces.max() == 14
    assert mesh.scalars["K"].shape == (15,)


def test_obj_output_is_deterministic(tmp_path):
    X = plane(3)
    first = export_service.export_mesh(X, tmp_path / "a.obj", Projection.DROP_X0)
    export_service.export_mesh(X, tmp_path / "b.obj", Projection.DROP_X0)
    text = (tmp_path / "a.obj").read_text()
    assert text == (tmp_path / "b.obj").read_text()
    lines = text.splitlines()
    assert lines[0] == "# bryant4 surface mesh"
    assert sum(line.startswith("v ") for line in lines) == 9
    faces = [line for line in lines if line.startswith("f ")]
    assert len(faces) == len(first.faces) == 4
    assert faces[0] == "f 1 4 5 2"


def test_ply_output(tmp_path):
    path = tmp_path / "mesh.ply"
    export_service.export_mesh(
        hyperboloid_points(1.0, 3), path, Projection.POINCARE_BALL, MeshFormat.PLY, r=1.0,
        scalars={"H": np.zeros((3, 3))},
    )
    lines = path.read_text().splitlines()
    assert lines[:2] == ["ply", "format ascii 1.0"]
    assert "comment projection = poincare_ball" in lines
    assert "element vertex 9" in lines
    assert "property double H" in lines
    assert "element face 4" in lines
    assert lines[-1].startswith("4 ")


def test_report_lines_are_ordered():
    report = SurfaceReport(pipeline=Pipeline.VERIFY, exit_code=0, info={"z": "last", "a": "first"})
    report.add("metric", 1e-9, 1e-5)
    report.add("schwarzian", 1e-3, 1e-5)
    lines = export_service.report_lines(report)
    assert lines[:5] == [
        "pipeline = verify",
        "exit_code = 0",
        "passed = false",
        "info.a = first",
        "info.z = last",
    ]
    assert lines[5] == "residual.metric = 1.000000000000e-09"
    assert lines[-1] == "passed.schwarzian = false"


def test_report_error_block(tmp_path):
    report = SurfaceReport(
        pipeline=Pipeline.LIMITS,
        exit_code=1,
        error={"code": "f_vanishes", "message": "f vanishes", "details": {"location": "1j"}},
    )
    path = export_service.write_report(report, tmp_path / "out" / "report.txt")
    text = path.read_text()
    assert "error.code = f_vanishes\n" in text
    assert "error.details.location = 1j\n" in text


def test_csv(tmp_path):
    path = export_service.write_csv(tmp_path / "d.csv", ["r", "sup"], [(0.1, 0.01), (0.05, 0.005)])
    lines = path.read_text().splitlines()
    assert lines[0] == "r,sup"
    assert len(lines) == 3
    assert float(lines[2].split(",")[1]) == pytest.approx(0.005)
