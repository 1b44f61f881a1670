import json
import os

import pytest

from transdiff import cli
from transdiff.report import Report

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "demos", "configs")


def write(tmp_path, cfg, name="exp.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


SPECTRAL = {
    "experiment": "spectral-suite",
    "seed": 1,
    "coefficients": {"diagonal": {"eps_plus": 1.0, "eps_minus": 4.0}},
    "grid": {"lo": -5.0, "hi": 5.0, "n": 64},
    "pairs": 3,
}


def test_success_writes_report_and_csv(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", write(tmp_path, SPECTRAL), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["passed"] is True
    assert report["seed"] == 1
    assert len(report["config_sha256"]) == 64
    assert report["version"]
    for check in report["checks"]:
        assert {"name", "value", "tolerance", "passed", "relation"} <= set(check)
    body = (out / "eigenvalues.csv").read_bytes()
    assert body.startswith(b"k,gamma\r\n")


def test_positional_config_and_seed_override(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", write(tmp_path, SPECTRAL), "--out", str(out), "--seed", "77"]) == 0
    assert json.loads((out / "report.json").read_text())["seed"] == 77


def test_zero_diffusivity_is_rejected(tmp_path, capsys):
    cfg = dict(SPECTRAL, coefficients={"diagonal": {"eps_plus": 1.0, "eps_minus": 0.0}})
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    assert "ellipticity condition violated" in capsys.readouterr().err
    assert not out.exists()


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = dict(SPECTRAL, surprise=3)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    assert "surprise" in capsys.readouterr().err
    assert not out.exists()


def test_missing_section_rejected(tmp_path, capsys):
    cfg = {k: v for k, v in SPECTRAL.items() if k != "grid"}
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 1
    assert "grid" in capsys.readouterr().err


def test_malformed_json_reports_line(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text('{\n  "experiment": "aronson",\n  "grid": [1, 2,,]\n}')
    assert cli.main(["run", "--config", str(path), "--out", str(tmp_path / "o")]) == 1
    assert "bad.json:3:" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "nope.json")]) == 1


def test_runtime_contract_error_exit_one(tmp_path):
    cfg = {"experiment": "aronson", "coefficients": {"diagonal": {"eps_plus": 1.0, "eps_minus": 4.0}},
           "grid": {"lo": -2.0, "hi": 2.0, "n": 64}, "t_list": [5.0]}
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(out)]) == 1
    assert not out.exists()


def test_failed_check_exit_two(tmp_path, monkeypatch):
    def failing(cfg, seed, threads):
        rep = Report("x")
        rep.add("always_fails", 1.0, 0.0)
        return rep, {}

    monkeypatch.setitem(cli._RUNNERS, "spectral-suite", failing)
    out = tmp_path / "out"
    assert cli.main(["run", "--config", write(tmp_path, SPECTRAL), "--out", str(out)]) == 2
    assert json.loads((out / "report.json").read_text())["passed"] is False


def test_repeat_runs_are_byte_identical(tmp_path):
    cfg = {
        "experiment": "ensemble-dump",
        "seed": 4,
        "geometry": {"kind": "sphere", "center": [0.0, 0.0], "radius": 1.0},
        "coefficients": {"diagonal": {"eps_plus": 1.0, "eps_minus": 3.0}},
        "simulation": {"dt_bulk": 0.01, "n_paths": 300},
        "start": [0.9, 0.0],
        "horizon": 0.2,
        "trace_paths": [5],
    }
    path = write(tmp_path, cfg)
    for name in ("a", "b"):
        assert cli.main(["run", "--config", path, "--out", str(tmp_path / name), "--threads", "2"]) == 0
    for f in ("terminal.csv", "trace_5.csv", "report.json"):
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_fk_compare_small(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", os.path.join(CONFIGS, "fk_1d_small.json"), "--out", str(out)]) == 0
    rows = (out / "probes.csv").read_text().splitlines()
    assert rows[0] == "x,t,mc,std_error,reference,discrepancy,tolerance,passed"
    assert len(rows) == 3


def test_density_check(tmp_path):
    cfg = {"experiment": "density-check", "seed": 3,
           "coefficients": {"diagonal": {"eps_plus": 1.0, "eps_minus": 4.0}},
           "density": {"t": 0.5, "x": 0.0, "n_draws": 20000}}
    assert cli.main(["run", "--config", write(tmp_path, cfg), "--out", str(tmp_path / "o")]) == 0


@pytest.mark.parametrize("name", sorted(f for f in os.listdir(CONFIGS) if f.endswith(".json")))
def test_demo_configs_validate(name):
    path = os.path.join(CONFIGS, name)
    if name.startswith("bad_"):
        with pytest.raises(cli.UsageError):
            cli.load_config(path)
    else:
        cli.load_config(path)
