import json

import pytest
import yaml

from grushin.cli import EXIT_INVALID, EXIT_THRESHOLD, RunConfig, build_parser, run
from grushin.errors import DomainError

SMALL = {"problem": {"mu_fraction": 0.05}, "grid": {"nodes": 33}, "solver": {"seeds": [0, 1]}}
CRITICAL = {
    "problem": {"regime": "critical", "r": 0.5, "mu_fraction": 0.5, "box": [[-1, 1], [-0.5, 0.5]],
                "ball": {"center": [0.6, 0.0], "radius": 0.15}},
    "grid": {"nodes": 65},
    "critical": {"center": [0.0, 0.0], "radius": 0.45, "gap_samples": 100, "floor_samples": 10},
}


def write_config(tmp_path, data, name="cfg.yaml"):
    path = tmp_path / name
    path.write_text(yaml.safe_dump(data))
    return str(path)


def test_all_subcommands_registered():
    parser = build_parser()
    for name in ("validate", "solve", "fibering", "sobolev", "bubble", "mpl-gap", "solve-critical", "sweep"):
        assert parser.parse_args([name]).command == name


def test_config_rejects_unknown_keys():
    with pytest.raises(DomainError):
        RunConfig.from_dict({"solver": {"tolerance": 1}})
    with pytest.raises(DomainError):
        RunConfig.from_dict({"extras": {}})
    with pytest.raises(DomainError):
        RunConfig.from_dict({"problem": {"mu": 0.1, "mu_fraction": 0.1}})


def test_validate_exit_codes(tmp_path, capsys):
    assert run(["validate", "--out", str(tmp_path / "a")]) == 0
    bad = write_config(tmp_path, {"problem": {"s": 7.0}})
    assert run(["validate", "--config", bad, "--out", str(tmp_path / "b")]) == EXIT_INVALID
    assert "s < 2*_lambda-1 violated" in capsys.readouterr().out


def test_unknown_key_exit_code(tmp_path):
    cfg = write_config(tmp_path, {"grid": {"size": 3}})
    assert run(["validate", "--config", cfg]) == EXIT_INVALID


def test_threshold_exit_code(tmp_path):
    cfg = write_config(tmp_path, {**SMALL, "problem": {"mu_fraction": 1.5}})
    assert run(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == EXIT_THRESHOLD


def test_solve_writes_reports(tmp_path, capsys):
    cfg = write_config(tmp_path, SMALL)
    out = tmp_path / "solve"
    assert run(["solve", "--config", cfg, "--out", str(out)]) == 0
    report = json.loads((out / "solve.json").read_text())
    assert report["results"]["minus"]["energy"] > 0 > report["results"]["plus"]["energy"]
    assert report["constants"]["mu0"] > 0
    for name in ("field_minus.csv", "field_plus.csv", "trace_minus.csv"):
        assert (out / name).exists()
    assert capsys.readouterr().out.startswith("solve (mu=")


def test_output_root_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("GRUSHIN_OUTPUT_ROOT", str(tmp_path))
    assert run(["validate"]) == 0
    assert (tmp_path / "validate" / "validate.json").exists()


def test_fibering_and_sobolev(tmp_path):
    cfg = write_config(tmp_path, SMALL)
    assert run(["fibering", "--config", cfg, "--out", str(tmp_path / "f")]) == 0
    assert json.loads((tmp_path / "f" / "fibering.json").read_text())["fibering"]["case"] == "b"
    assert run(["sobolev", "--config", cfg, "--out", str(tmp_path / "s"), "--exponents", "2", "4"]) == 0
    assert set(json.loads((tmp_path / "s" / "sobolev.json").read_text())["sobolev"]) == {"2", "4"}


def test_critical_subcommands(tmp_path):
    cfg = write_config(tmp_path, CRITICAL)
    assert run(["bubble", "--config", cfg, "--out", str(tmp_path / "b")]) == 0
    assert (tmp_path / "b" / "asymptotics.csv").exists()
    assert run(["mpl-gap", "--config", cfg, "--out", str(tmp_path / "g")]) == 0
    assert run(["solve-critical", "--config", cfg, "--out", str(tmp_path / "c")]) == 0
    report = json.loads((tmp_path / "c" / "solve_critical.json").read_text())
    assert report["levels"]["window_holds"]
    assert report["distinctness"] > 1e-2


def test_subcritical_command_rejects_critical(tmp_path):
    cfg = write_config(tmp_path, CRITICAL)
    assert run(["solve", "--config", cfg, "--out", str(tmp_path / "x")]) == EXIT_INVALID


def test_sweep(tmp_path):
    cfg = write_config(tmp_path, {"problem": {"mu": 0.01}, "grid": {"nodes": 33}, "solver": {"seeds": [0]}})
    code = run(["sweep", "--config", cfg, "--out", str(tmp_path / "w"), "--values", "0.01", "0.1", "5"])
    assert code == EXIT_THRESHOLD
    runs = json.loads((tmp_path / "w" / "sweep.json").read_text())["runs"]
    assert [r["exit_code"] for r in runs] == [0, 0, EXIT_THRESHOLD]
