import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from nvpol.cli import SCHEMA, main, resolve_config
from nvpol.errors import InvalidParameter
from nvpol.signal import eq7_contrast

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def test_levels_default_csv(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["levels", "-q", "-o", "levels.csv"]) == 0
    lines = (tmp_path / "levels.csv").read_text().splitlines()
    assert lines[0].startswith("B0_G,")
    assert len(lines) == 602
    first = [float(v) for v in lines[1].split(",")]
    assert first[4] == pytest.approx(106.8, abs=1e-6)
    assert "levels: 601 fields" in capsys.readouterr().out


@pytest.mark.parametrize("sim,model,key,truth", [
    (["relax", "--kind", "plus"], "exponential", "decay_time", 7.0),
    (["relax", "--kind", "zero"], "exponential", "decay_time", 23.0),
    (["buildup"], "buildup", "buildup_time", 1.5),
    (["spectrum"], "lorentzian", "center", None),
])
def test_simulate_then_fit_round_trip(tmp_path, monkeypatch, capsys, sim, model, key, truth):
    monkeypatch.chdir(tmp_path)
    assert main([*sim, "-q", "-o", "sim.csv"]) == 0
    assert main(["fit", "-q", "--model", model, "-i", "sim.csv", "-o", "fit.txt"]) == 0
    report = dict(ln.split("=", 1) for ln in (tmp_path / "fit.txt").read_text().splitlines())
    assert report["converged"] == "true"
    if truth is None:
        from nvpol.kinetics import default_resonance
        truth = default_resonance()
    assert float(report[key]) == pytest.approx(truth, abs=1e-3)


def test_field_round_trip_with_fixed_azimuth(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert main(["field", "-q", "-o", "f.csv", "--set", "run.noise=0.3", "--seed", "2"]) == 0
    assert main(["fit", "-q", "--model", "field", "-i", "f.csv", "-o", "r.txt",
                 "--set", "fit.phi=20"]) == 0
    report = dict(ln.split("=", 1) for ln in (tmp_path / "r.txt").read_text().splitlines())
    assert abs(float(report["theta"]) - 8.0) < 3 * float(report["theta_err"])


def test_depth_fit_with_monte_carlo(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    d = np.array([12.0, 23.0, 49.0])
    sc = eq7_contrast(d, 0.1)
    rows = "\n".join(f"{a:.17g},{b:.17g},{0.03 * b:.17g}" for a, b in zip(d, sc))
    (tmp_path / "depth.csv").write_text("x,y,sigma\n" + rows + "\n")
    assert main(["fit", "-q", "-c", str(CONFIGS / "fit.ini"), "-i", "depth.csv",
                 "--set", "fit.n_samples=200"]) == 0
    text = (tmp_path / "fit_report.txt").read_text()
    report = dict(ln.split("=", 1) for ln in text.splitlines())
    assert float(report["P"]) == pytest.approx(0.1) and "sigma_P" in report
    doc = json.loads((tmp_path / "fit_report.json").read_text())
    assert doc["result"]["params"]["P"] == pytest.approx(0.1)
    assert "sigma_P" in doc["result"]


def test_negative_density_names_key(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "bad.ini").write_text("[physics]\nrho = -1e-3\n")
    assert main(["contrast", "-q", "-c", "bad.ini"]) == 1
    assert "rho" in capsys.readouterr().err


def test_unknown_key_and_section(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "bad.ini").write_text("[physics]\ndensity = 1\n")
    assert main(["levels", "-q", "-c", "bad.ini"]) == 1
    assert "density" in capsys.readouterr().err
    assert main(["levels", "-q", "--set", "plot.color=red"]) == 1
    assert "plot" in capsys.readouterr().err
    assert main(["levels", "-q", "--set", "physics.theta=abc"]) == 1
    assert "theta" in capsys.readouterr().err


def test_io_error_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["fit", "-q", "-i", "missing.csv"]) == 3
    assert main(["levels", "-q", "-c", "missing.ini"]) == 3
    assert main(["levels", "-q", "-o", str(tmp_path / "no" / "dir.csv")]) == 3


def test_numerical_failure_exit_code(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    # with no polarization the ratio never settles, so no volume is found
    assert main(["volume", "-q", "--set", "physics.P=0", "--set", "sweep.values=1"]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_flags_beat_file(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "c.ini").write_text("[run]\nseed = 1\n[io]\noutput = from_file.csv\n")
    cfg = resolve_config("c.ini", ["run.seed=5", "io.output=from_flag.csv"])
    assert cfg["run"]["seed"] == 5 and cfg["io"]["output"] == "from_flag.csv"
    cfg = resolve_config("c.ini")
    assert cfg["run"]["seed"] == 1
    with pytest.raises(InvalidParameter):
        resolve_config(None, ["noequals"])


def test_reproducible_and_worker_independent(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    args = ["spectrum", "-q", "--set", "run.noise=0.001", "--seed", "9",
            "--report", "r{}.json", "-o", "s{}.csv"]
    outputs = []
    for i, workers in enumerate(("1", "4", "1")):
        monkeypatch.setenv("NVPOL_WORKERS", workers)
        assert main([a.format(i) for a in args]) == 0
        outputs.append((tmp_path / f"s{i}.csv").read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    docs = [json.loads((tmp_path / f"r{i}.json").read_text()) for i in range(3)]
    for doc in docs:
        assert "timestamp" in doc["header"]
        doc.pop("header")
        doc["config"].pop("io")   # output names differ per run
    assert docs[0] == docs[1] == docs[2]
    for workers in ("1", "3"):
        monkeypatch.setenv("NVPOL_WORKERS", workers)
        assert main(["volume", "-q", "-o", f"v{workers}.csv"]) == 0
    assert (tmp_path / "v1.csv").read_bytes() == (tmp_path / "v3.csv").read_bytes()
    monkeypatch.setenv("NVPOL_WORKERS", "zero")
    assert main(["volume", "-q", "-o", "v.csv"]) == 1


def test_resolved_config_echo(tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    assert main(["slopes", "-o", "s.csv"]) == 0
    captured = capsys.readouterr()
    assert "[physics]" in captured.err and "theta = 8.0" in captured.err
    assert captured.out.startswith("slopes at 512 G")


def test_every_example_config_runs(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    for path in sorted(CONFIGS.glob("*.ini")):
        if path.stem == "fit":
            continue
        assert main([path.stem, "-q", "-c", str(path)]) == 0, path.name
        assert Path(resolve_config(str(path))["io"]["output"]).exists()


def test_help_lists_defaults():
    out = subprocess.run([sys.executable, "-m", "nvpol.cli", "levels", "--help"],
                         capture_output=True, text=True, check=True).stdout
    for section, keys in SCHEMA.items():
        assert f"[{section}]" in out
    assert "D = -776.55" in out and "pentacene" in out
