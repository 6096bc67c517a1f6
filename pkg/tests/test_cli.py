import json
import subprocess
import sys

import numpy as np
import pytest
import yaml

from aloe import cli
from aloe.config import bench_config, case_from_spec, case_name, load_yaml, schedule_for, thresholds_for
from aloe.errors import ConfigError, NumericalError


def write_yaml(path, doc):
    path.write_text(yaml.safe_dump(doc))
    return str(path)


# -- config --------------------------------------------------------------------


def test_case_specs():
    assert case_from_spec("case2").name == "case2"
    c = case_from_spec({"preset": "case3", "name": "c3wide", "grad_eps": 0.45, "lengthscale": 5.0,
                        "noise_variance": 0.01, "minima": [[4, 4]]})
    assert (c.name, c.grad_eps, c.kernel.lengthscale, c.kernel.signal_variance, c.sigma2) == ("c3wide", 0.45, 5.0, 2.0, 0.01)
    assert c.minima == ((4.0, 4.0),)
    assert case_name({"preset": "case1"}) == "case1"
    for bad in ({"grad_eps": 0.3}, {"preset": "case3", "colour": 1}, {"preset": "nope"}, 7,
                {"kind": "data", "path": "x.csv"}):
        with pytest.raises(ConfigError):
            case_from_spec(bad)


def test_data_case_spec(tmp_path):
    axis = np.linspace(0, 8, 9)
    rows = [(a, b, (a - 4) ** 2 + (b - 4) ** 2) for a in axis for b in axis]
    data = tmp_path / "bowl.csv"
    data.write_text("x,y,v\n" + "\n".join(",".join(map(str, r)) for r in rows))
    spec = {"kind": "data", "path": str(data), "A": 0.0, "B": 8.0, "divisions": 16, "sub_box": [1, 7],
            "signal_variance": 50.0, "lengthscale": 9.0, "noise_variance": 0.01, "truth_noise_variance": 1e-6}
    c = case_from_spec(spec)
    assert c.name == "bowl"
    assert c.minima == ((4.0, 4.0),)
    assert case_name(spec) == "bowl"


def test_bench_config_validation(tmp_path):
    cfg = bench_config({"cases": ["case3"], "strategies": ["US"], "repetitions": 2, "horizon": 3})
    assert cfg.cases == ("case3",) and cfg.repetitions == 2
    for bad in ({"strategies": ["Magic"]}, {"cases": []}, {"repetitions": 0}, {"bogus": 1},
                {"cases": ["case3", "case3"]}, {"mode": "both"}, {"workers": 0}):
        with pytest.raises(ConfigError):
            bench_config(bad)
    with pytest.raises(ConfigError):
        load_yaml(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [1, 2\n")
    with pytest.raises(ConfigError):
        load_yaml(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_yaml(bad)


def test_schedules_and_thresholds():
    c = case_from_spec("case3")
    assert schedule_for(c, None).scales(1, 2, 10) == (3.0, 3.0)
    th = schedule_for(c, {"mode": "finite", "delta": 0.05})
    assert th.mode == "finite"
    with pytest.raises(ConfigError):
        schedule_for(c, {"mode": "finite", "delta": 2.0})
    with pytest.raises(ConfigError):
        schedule_for(c, {"speed": 1})
    t = thresholds_for(c)
    assert t.grad_eps == (0.35, 0.35) and t.eig_eps == 0.1


# -- commands --------------------------------------------------------------------


def test_truth_command(capsys):
    assert cli.main(["truth", "case2"]) == 0
    out = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert sorted(tuple(r["x"]) for r in out) == [(2.0, 2.0), (2.0, 7.0), (7.0, 2.0), (7.0, 7.0)]


def test_run_command_writes_trace(tmp_path, capsys):
    out = tmp_path / "trace.jsonl"
    assert cli.main(["run", "--case", "case3", "--strategy", "US", "--budget", "3", "--seed", "1",
                     "--snapshots", "--out", str(out)]) == 0
    recs = [json.loads(line) for line in out.read_text().splitlines()]
    assert [r["t"] for r in recs] == [1, 2, 3]
    assert len(recs[0]["snapshot"]) == 33**2
    assert "F=" in capsys.readouterr().err


def test_run_command_from_config(tmp_path, capsys):
    cfg = write_yaml(tmp_path / "run.yaml", {"case": {"preset": "case3", "name": "c3"}, "strategy": "LCB",
                                             "budget": 2, "schedule": {"mode": "finite", "delta": 0.1}})
    assert cli.main(["run", "--config", cfg]) == 0
    recs = [json.loads(line) for line in capsys.readouterr().out.splitlines()]
    assert len(recs) == 2
    assert recs[0]["beta_sqrt"] > 3.0
    assert recs[0]["branch"] == "lcb"


def test_eta_command(capsys):
    assert cli.main(["eta", "--case", "case3", "--budget", "2"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "step,eta,eta_sq,eps_sq,unknown,complete_guaranteed"
    assert len(lines) == 3


def test_bench_command(tmp_path):
    out = tmp_path / "m.csv"
    assert cli.main(["bench", "--cases", "case3", "--strategies", "US,Random", "--repetitions", "1",
                     "--horizon", "2", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "case,strategy,step,precision_mean,recall_mean,fscore_mean"
    assert len(lines) == 1 + 2 * 2


def test_fit_truth_command(tmp_path, capsys):
    data = tmp_path / "d.csv"
    axis = np.linspace(0, 4, 5)
    data.write_text("\n".join(f"{a},{b},{(a - 2) ** 2 + (b - 2) ** 2}" for a in axis for b in axis) + "\n0,0,999\n")
    assert cli.main(["fit-truth", str(data), "--lengthscale", "6", "--signal-variance", "20",
                     "--noise-variance", "1e-6", "--outlier-cutoff", "100", "--grid", "0", "4", "8", "0.5", "3.5"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {"rows": 26, "dropped": 1, "dim": 2, "minima": [[2.0, 2.0]]}


def test_config_errors_exit_1(tmp_path, capsys):
    assert cli.main(["bench", "--strategies", "Magic"]) == 1
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == 1
    cfg = write_yaml(tmp_path / "bad.yaml", {"case": "case3", "speed": 3})
    assert cli.main(["eta", "--config", cfg]) == 1
    assert cli.main(["run", "--case", "nope"]) == 1
    assert cli.main(["fit-truth", str(tmp_path / "none.csv"), "--lengthscale", "1"]) == 1
    assert "error:" in capsys.readouterr().err


def test_numerical_failure_exit_2(monkeypatch, capsys):
    import aloe.driver

    def broken(*a, **k):
        raise NumericalError("singular")

    monkeypatch.setattr(aloe.driver, "run", broken)
    assert cli.main(["run", "--budget", "2"]) == 2
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "aloe.cli", "truth", "case3"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == {"index": 544, "x": [4.0, 4.0]}
    bad = subprocess.run([sys.executable, "-m", "aloe.cli", "run", "--case", "case9"], capture_output=True, text=True)
    assert bad.returncode == 1
