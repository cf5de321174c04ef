import subprocess
import sys

import numpy as np
import pytest

from robust_miso import pareto
from robust_miso.cli import EXIT_FAILURES, EXIT_USAGE, main, parse_grid
from robust_miso.model import load_scenario
from robust_miso.pareto import read_region_csv


@pytest.fixture
def scenario2(tmp_path):
    path = tmp_path / "s2.json"
    assert main(["generate", "--k", "2", "--antennas", "3", "--eps", "0.3",
                 "--noise", "0.5", "--seed", "7", "--out", str(path)]) == 0
    return path


def test_generate_deterministic(tmp_path, capsys):
    args = ["generate", "--k", "3", "--antennas", "3,3,3", "--eps", "0.5", "--seed", "7"]
    assert main(args + ["--out", str(tmp_path / "a.json")]) == 0
    first = capsys.readouterr().out.strip()
    assert main(args + ["--out", str(tmp_path / "b.json")]) == 0
    second = capsys.readouterr().out.strip()
    assert first == second and len(first) > 0
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    s = load_scenario(tmp_path / "a.json")
    assert s.K == 3 and s.antennas == [3, 3, 3] and np.all(s.epsilons() == 0.5)
    assert s.digest() == first


def test_generate_eps_matrix(tmp_path):
    out = tmp_path / "m.json"
    assert main(["generate", "--k", "2", "--antennas", "2,3", "--eps", "0.1,0.2,0.3,0.4",
                 "--powers", "1,2", "--out", str(out)]) == 0
    s = load_scenario(out)
    assert s.epsilons().tolist() == [[0.1, 0.2], [0.3, 0.4]]
    assert s.powers == [1.0, 2.0]


@pytest.mark.parametrize("bad", [
    ["--eps", "-1"], ["--eps", "0.1,0.2"], ["--antennas", "3,0"], ["--powers", "1,-1"],
    ["--noise", "0"], ["--k", "0"], ["--eps", "abc"],
])
def test_generate_validation(tmp_path, bad, capsys):
    args = {"--k": "2", "--antennas": "3", "--eps": "0.1", "--out": str(tmp_path / "x.json")}
    args.update(dict(zip(bad[::2], bad[1::2])))
    flat = ["generate"] + [v for kv in args.items() for v in kv]
    assert main(flat) == EXIT_USAGE
    assert "error" in capsys.readouterr().err
    assert not (tmp_path / "x.json").exists()


def test_missing_scenario(tmp_path):
    assert main(["region", "--scenario", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE


def test_corrupt_scenario(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"K": 2}')
    assert main(["region", "--scenario", str(bad), "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE


def test_region_nested_and_deterministic(scenario2, tmp_path):
    coarse, fine, again = (tmp_path / n for n in ("c.csv", "f.csv", "f2.csv"))
    assert main(["region", "--scenario", str(scenario2), "--step", "0.5", "--out", str(coarse)]) == 0
    assert main(["region", "--scenario", str(scenario2), "--step", "0.05", "--out", str(fine)]) == 0
    assert main(["region", "--scenario", str(scenario2), "--step", "0.05", "--out", str(again)]) == 0
    assert fine.read_bytes() == again.read_bytes()
    assert (tmp_path / "f.csv.log").read_bytes() == (tmp_path / "f2.csv.log").read_bytes()
    c, _ = read_region_csv(coarse)
    f, _ = read_region_csv(fine)
    for row in c:
        assert np.any(np.all(f >= row - 1e-12, axis=1))
    # mutually non-dominated output
    for i, row in enumerate(f):
        ge = np.all(f >= row, axis=1)
        ge[i] = False
        assert not ge.any()
    log = (tmp_path / "f.csv.log").read_text().splitlines()
    assert log[0].startswith("scenario=") and "failures=0" in log[0]
    assert len(log) == 1 + 2 * 21


def test_region_structured(scenario2, tmp_path):
    out = tmp_path / "r.json"
    assert main(["region", "--scenario", str(scenario2), "--step", "0.5",
                 "--format", "structured", "--out", str(out), "--log", str(tmp_path / "l.txt")]) == 0
    assert out.read_text().startswith("{")
    assert (tmp_path / "l.txt").exists()


def test_region_failures_exit_code(scenario2, tmp_path, monkeypatch):
    monkeypatch.setattr(pareto, "_solve_one", lambda s, gamma, job: (None, "numerical_failure"))
    out = tmp_path / "r.csv"
    base = ["region", "--scenario", str(scenario2), "--step", "0.5", "--out", str(out)]
    assert main(base) == EXIT_FAILURES
    assert "status=numerical_failure" in (tmp_path / "r.csv.log").read_text()
    assert main(base + ["--allow-failures"]) == 0
    rates, _ = read_region_csv(out)
    assert rates.tolist() == [[0.0, 0.0]]


def test_region_step_validation(scenario2, tmp_path):
    for step in ("0", "1.5", "-0.1"):
        assert main(["region", "--scenario", str(scenario2), "--step", step,
                     "--out", str(tmp_path / "r.csv")]) == EXIT_USAGE


def test_sumrate(scenario2, tmp_path):
    out = tmp_path / "sum.csv"
    args = ["sumrate", "--scenario", str(scenario2), "--law", "constant", "--coef", "0.3",
            "--snr-db", "0:60:10", "--step", "0.1", "--out", str(out)]
    assert main(args) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "snr_db,sum_rate" and len(lines) == 8
    log = (tmp_path / "sum.csv.log").read_text()
    assert "active_links=1" in log
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first


@pytest.mark.parametrize("extra", [
    ["--law", "custom_exponent"], ["--law", "constant", "--exponent", "0.2"],
    ["--coef", "-1"], ["--snr-db", "10:0:1"], ["--snr-db", "1:2"],
])
def test_sumrate_validation(scenario2, tmp_path, extra):
    args = ["sumrate", "--scenario", str(scenario2), "--strategy", "zero_forcing",
            "--out", str(tmp_path / "s.csv")] + extra
    assert main(args) == EXIT_USAGE


def test_sumrate_custom_law(scenario2, tmp_path):
    out = tmp_path / "c.csv"
    assert main(["sumrate", "--scenario", str(scenario2), "--law", "custom_exponent",
                 "--coef", "1", "--exponent", "0.4", "--strategy", "zero_forcing",
                 "--snr-db", "0,20,40", "--out", str(out)]) == 0
    assert len(out.read_text().splitlines()) == 4


def test_lowsnr(scenario2, tmp_path):
    prefix = str(tmp_path / "lo")
    args = ["lowsnr", "--scenario", str(scenario2), "--step", "0.1", "--scatter",
            "--out-prefix", prefix]
    assert main(args) == 0
    names = ["_metrics.csv", "_spectral.csv", "_ebno_region.csv", "_slope_region.csv",
             "_ebno_points.csv", "_slope_points.csv", ".log"]
    first = {n: open(prefix + n, "rb").read() for n in names}
    metrics = first["_metrics.csv"].decode().splitlines()
    assert metrics[0] == "link,ebno_min,ebno_min_db,wideband_slope" and len(metrics) == 3
    spectral = first["_spectral.csv"].decode().splitlines()
    assert len(spectral) == 1 + 25
    assert main(args) == 0
    for n in names:
        assert open(prefix + n, "rb").read() == first[n], n
    assert main(args[:-2] + ["--link", "3", "--out-prefix", prefix]) == EXIT_USAGE


def test_workers_do_not_change_output(scenario2, tmp_path):
    one, two = tmp_path / "one.csv", tmp_path / "two.csv"
    base = ["region", "--scenario", str(scenario2), "--step", "0.25"]
    assert main(base + ["--out", str(one)]) == 0
    assert main(base + ["--out", str(two), "--workers", "2"]) == 0
    assert one.read_bytes() == two.read_bytes()


def test_parse_grid():
    assert parse_grid("0:60:20", "x") == [0.0, 20.0, 40.0, 60.0]
    assert parse_grid("-2:-1:0.5", "x") == [-2.0, -1.5, -1.0]
    assert parse_grid("1,5", "x") == [1.0, 5.0]
    for bad in ("1:0:1", "0:1:0", ",", "a:b:c"):
        with pytest.raises(ValueError):
            parse_grid(bad, "x")


def test_module_entry_point(tmp_path):
    out = tmp_path / "s.json"
    proc = subprocess.run([sys.executable, "-m", "robust_miso", "generate", "--k", "1",
                           "--antennas", "2", "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0 and out.exists()
    bad = subprocess.run([sys.executable, "-m", "robust_miso", "generate", "--k", "1",
                          "--antennas", "2", "--eps", "-1", "--out", str(out)],
                         capture_output=True, text=True)
    assert bad.returncode == EXIT_USAGE
