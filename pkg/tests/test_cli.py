from typer.testing import CliRunner

from main import app

runner = CliRunner()


def write_job(tmp_path, text):
    path = tmp_path / "job.yaml"
    path.write_text(text)
    return str(path)


def test_classify_command(tmp_path):
    config = write_job(tmp_path, "g: z\nw: '1'\neps: -1\n")
    result = runner.invoke(app, ["classify", "--config", config, "--grid-n", "17"])
    assert result.exit_code == 0, result.output
    assert "ftc_verdict = AdmissibleFTC" in result.output
    assert "exit code 0" in result.output


def test_generate_writes_artifacts(tmp_path):
    config = write_job(tmp_path, "g: z\neps: -1\n")
    out = tmp_path / "out"
    result = runner.invoke(app, ["generate", "-c", config, "-o", str(out), "--grid-n", "17"])
    assert result.exit_code == 0, result.output
    assert (out / "report.txt").exists()
    assert (out / "surface.obj").exists()
    assert "weierstrass_oracle" in (out / "report.txt").read_text()


def test_invalid_config_exits_with_one(tmp_path):
    config = write_job(tmp_path, "g: z\n")
    result = runner.invoke(app, ["verify", "--config", config])
    assert result.exit_code == 1
    assert "config_error" in result.output


def test_validation_failure_exit_code(tmp_path):
    config = write_job(tmp_path, "g: '3'\neps: -1\n")
    result = runner.invoke(app, ["generate", "--config", config, "--grid-n", "17"])
    assert result.exit_code == 1
    assert "flat_data" in result.output


def test_tol_scale_reaches_the_report(tmp_path):
    config = write_job(tmp_path, "g: z\neps: -1\n")
    out = tmp_path / "out"
    result = runner.invoke(app, ["generate", "-c", config, "-o", str(out), "--grid-n", "17", "--tol-scale", "10"])
    assert result.exit_code == 0, result.output
    assert "tolerance.det_drift = 1.000000000000e-08" in (out / "report.txt").read_text()
