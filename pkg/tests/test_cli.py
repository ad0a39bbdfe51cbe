import json
import math

import pytest

from freqbs.cli import main


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_run_example(capsys):
    assert main(["run", "--example", "hom", "--no-timing"]) == 0
    data = _json(capsys)
    assert data["metrics"]["coincidence"] == pytest.approx(0.0, abs=1e-12)
    assert "wall_clock_s" not in data


def test_run_file_and_global_flag_after_subcommand(tmp_path, capsys):
    from freqbs.cli import example_text

    path = tmp_path / "fbs.json"
    path.write_text(example_text("fbs"))
    assert main(["run", str(path), "--output", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("outcome,probability")


def test_validation_error_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{"bins": []}')
    assert main(["run", str(path)]) == 1
    assert "error" in capsys.readouterr().err


def test_missing_file_is_validation_error(capsys):
    assert main(["run", "/nonexistent/doc.json"]) == 1


def test_scenario_prime(capsys):
    assert main(["scenario", "biexciton-fbs-prime", "--alpha", "0.8"]) == 0
    data = _json(capsys)
    assert data["success_probability"] == pytest.approx(0.63936016, abs=1e-9)


def test_scenario_erasure_csv(capsys):
    assert main(["--output", "csv", "scenario", "erasure", "--theta", str(math.pi / 8)]) == 0
    out = capsys.readouterr().out
    assert out.splitlines()[0].startswith("outcome,probability")


def test_sweep_to_file(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(["--output", "csv", "--out", str(out), "sweep", "--example", "hom",
                 "--param", "components.0.theta", "--from", "0", "--to", "0.785398", "--steps", "3",
                 "--metric", "coincidence"])
    assert code == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "components.0.theta,coincidence" and len(lines) == 4


def test_device(capsys):
    assert main(["device", "GaP", "--target-theta", "0.785"]) == 0
    data = _json(capsys)
    assert data["R_s"] > 0 and data["required_intensity_w_per_m2"] > 0


def test_device_runtime_error(capsys):
    assert main(["device", "GaP", "--length", "-1"]) == 1


def test_oracle_random(capsys):
    assert main(["--seed", "3", "oracle", "--example", "fbs", "--random-trials", "4"]) == 0
    data = _json(capsys)
    assert data["pass"] and len(data["rows"]) == 6


def test_examples_listing(capsys):
    assert main(["examples"]) == 0
    assert "hom" in capsys.readouterr().out.split()
