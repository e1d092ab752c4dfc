"""
Command-line integration tests: exit codes, stdout payloads and written files
"""

import json
from pathlib import Path

import pytest

from app.main import main
from core.io.artifacts import read_frame

DATA = Path(__file__).resolve().parents[2] / "data"


@pytest.fixture(autouse=True)
def fresh_logging(monkeypatch):
    # 每次调用 main 都重新绑定到当前捕获的 stderr
    monkeypatch.setattr("app.logging_config._CONFIGURED", False)


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


def _stderr_error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_validate_preset(capsys):
    assert main(["validate", "--algebra", "h3"]) == 0
    payload = _stdout_json(capsys)
    assert payload["result"]["n"] == 3
    assert payload["result"]["center"] == 1
    assert payload["header"]["command"] == "validate"


def test_validate_bad_file_is_domain_error(capsys):
    code = main(["validate", "--algebra", str(DATA / "algebras" / "bad_antisymmetry.json")])
    assert code == 2
    assert _stderr_error(capsys)["error"] == "antisymmetry_violation"


def test_validate_not_two_step(capsys):
    assert main(["validate", "--algebra", str(DATA / "algebras" / "not_two_step.json")]) == 2
    assert _stderr_error(capsys)["error"] == "not_two_step"


def test_missing_algebra_is_domain_error(capsys):
    assert main(["nonsingular"]) == 2
    assert _stderr_error(capsys)["error"] == "invalid_parameter"


def test_threads_must_be_positive(capsys):
    assert main(["nonsingular", "--algebra", "h3", "--threads", "0"]) == 2


def test_nonsingular_verdicts(capsys):
    assert main(["nonsingular", "--algebra", "h3"]) == 0
    assert _stdout_json(capsys)["result"]["verdict"] == "nonsingular"
    assert main(["nonsingular", "--algebra", "h3_x_h3"]) == 0
    result = _stdout_json(capsys)["result"]
    assert result["verdict"] == "singular"
    assert result["witness"] is not None


def test_abnormal_from_verdict(capsys):
    assert main(["abnormal", "--algebra", "r_x_h3", "--T", "2"]) == 0
    result = _stdout_json(capsys)["result"]
    assert result["abnormal"] is True
    assert result["pmp"]["hamiltonian"] <= 1e-10
    assert result["endpoint"][3] == pytest.approx(0.0)


def test_abnormal_on_nonsingular_group_fails(capsys):
    assert main(["abnormal", "--algebra", "h3"]) == 2
    assert _stderr_error(capsys)["error"] == "witness_not_singular"


def test_geodesic_l1(capsys):
    assert main(["geodesic", "--algebra", "h3", "--norm", "l1", "--covector", "1,0.3,1", "--T", "3"]) == 0
    result = _stdout_json(capsys)["result"]
    assert len(result["switch_times"]) == 2
    assert result["switch_times"][0] == pytest.approx(0.7)
    assert result["duration"] == pytest.approx(3.0)


def test_geodesic_csv_to_file(tmp_path, capsys):
    out = tmp_path / "geodesic.csv"
    argv = ["geodesic", "--algebra", "h3", "--covector", "1,0,6.283185307179586", "--T", "1",
            "--steps", "64", "--format", "csv", "--out", str(out)]
    assert main(argv) == 0
    frame = read_frame(out)
    assert len(frame) == 65
    assert out.read_text(encoding="utf-8").startswith("# config_digest: ")


def test_wordball(capsys):
    assert main(["wordball", "--lattice", "h3z", "--radius", "4"]) == 0
    result = _stdout_json(capsys)["result"]
    assert result["ball_sizes"][:3] == [1, 5, 17]
    assert "growth_degree" in result


def test_wordball_budget_writes_partial_table(tmp_path, capsys):
    out = tmp_path / "ball.csv"
    code = main(["wordball", "--lattice", "h3z", "--radius", "5", "--budget", "20", "--out", str(out)])
    assert code == 3
    error = _stderr_error(capsys)
    assert error["error"] == "budget_exceeded"
    assert error["details"]["completed_radius"] == 2
    assert len(read_frame(out)) == 17


def test_converge_z2(tmp_path, capsys):
    out = tmp_path / "z2"
    assert main(["converge", "--config", str(DATA / "experiments" / "z2.json"), "--out", str(out)]) == 0
    summary = _stdout_json(capsys)
    assert summary["exact_agreement"] is True
    assert summary["unreliable"] is False
    profile = read_frame(out / "profile.csv")
    assert profile["n"].tolist() == [4, 8, 12, 16]
    assert profile["D"].tolist() == [0.0, 0.0, 0.0, 0.0]
    fit = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert fit["alpha"] is None
    assert fit["header"]["seed"] == 20240601
    assert (out / "journal.json").exists()


def test_converge_budget_keeps_partial_profile(tmp_path, capsys):
    out = tmp_path / "partial"
    argv = ["converge", "--config", str(DATA / "experiments" / "z2.json"), "--out", str(out), "--budget", "100"]
    assert main(argv) == 3
    assert _stderr_error(capsys)["details"]["completed_radius"] == 6
    assert read_frame(out / "profile.csv")["n"].tolist() == [4]
    fit = json.loads((out / "fit.json").read_text(encoding="utf-8"))
    assert fit["notes"]["partial"] == {"completed_radius": 6, "requested_radius": 16}


def test_converge_bad_config_is_schema_error(tmp_path, capsys):
    config = tmp_path / "bad.json"
    config.write_text(json.dumps({"lattice": "h3z", "schedule": [8, 4]}), encoding="utf-8")
    assert main(["converge", "--config", str(config), "--out", str(tmp_path / "x")]) == 2
    assert _stderr_error(capsys)["error"] == "schema_error"


@pytest.mark.slow
def test_distance_h3_l1(capsys):
    argv = ["distance", "--algebra", "h3", "--norm", "l1", "--target", "0,0,1",
            "--segments", "16", "--restarts", "8", "--path-restarts", "2"]
    assert main(argv) == 0
    result = _stdout_json(capsys)["result"]
    assert result["lower"] == pytest.approx(4.0)
    assert 4.0 - 1e-6 <= result["upper"] <= 4.4
