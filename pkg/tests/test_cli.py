from __future__ import annotations

import csv
import json
import math
import subprocess
import sys

import pytest

from hilfer_mono.cli import ConfigError, main, resolve_config
from hilfer_mono.specfun import mittag_leffler

CAPUTO = {"problem": "scalar", "mu": 0.6, "nu": 1.0, "scalar": {"a": 1.0, "c": 0.0, "x0": 1.0}}


def write_cfg(tmp_path, cfg, name="run.json"):
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_solve_caputo_matches_series(tmp_path):
    out = tmp_path / "out"
    code = main(["--config", write_cfg(tmp_path, CAPUTO), "--out", str(out), "--grid-n", "256"])
    assert code == 0
    rows = read_csv(out / "trajectory.csv")
    assert list(rows[0]) == ["t", "k", "weight", "y_component_0", "z_component_0"]
    assert len(rows) == 256
    err = max(abs(float(r["y_component_0"]) - mittag_leffler(0.6, 1.0, -float(r["t"]) ** 0.6)) for r in rows)
    assert err <= 1e-3
    rep = json.loads((out / "report.json").read_text())
    for key in ("config", "eta", "iterations", "converged", "unique", "residual", "violations", "timings"):
        assert key in rep
    assert rep["config"]["mu"] == 0.6 and rep["config"]["grid_n"] == 256
    assert rep["converged"] and rep["unique"]
    assert (out / "timings.json").exists()


def test_weight_column_hilfer(tmp_path):
    out = tmp_path / "out"
    cfg = dict(CAPUTO, nu=0.5, impulses=[{"t": 0.5, "J": 0.2}])
    assert main(["--config", write_cfg(tmp_path, cfg), "--out", str(out), "--grid-n", "32"]) == 0
    rows = read_csv(out / "trajectory.csv")
    lam = 0.6 + 0.5 - 0.3
    for r in rows[::7]:
        tb = 0.0 if r["k"] == "0" else 0.5
        assert float(r["weight"]) == pytest.approx((float(r["t"]) - tb) ** (1 - lam), rel=1e-12)
    assert {r["k"] for r in rows} == {"0", "1"}


def test_config_error_names_field(tmp_path, capsys):
    code = main(["--config", write_cfg(tmp_path, dict(CAPUTO, nu=1.5)), "--out", str(tmp_path / "o")])
    assert code == 1
    assert "nu" in capsys.readouterr().err


@pytest.mark.parametrize("bad,field", [
    ({"mu": 1.0}, "mu"),
    ({"T": -1.0}, "T"),
    ({"grid_n": 1}, "grid_n"),
    ({"monotone": {"C": -0.5}}, "monotone.C"),
    ({"impulses": [{"t": 2.0}]}, "t"),
    ({"problem": "wave"}, "problem"),
    ({"colour": 1}, "colour"),
    ({"hypotheses": {"sample_budget": 10}}, "sample_budget"),
])
def test_resolve_config_rejects(bad, field):
    with pytest.raises(ConfigError, match=field):
        resolve_config(bad)


def test_missing_config_file(tmp_path):
    assert main(["--config", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 1


def test_check_hypotheses_eta(tmp_path):
    out = tmp_path / "out"
    cfg = {"problem": "scalar", "mu": 0.5, "nu": 0.5, "T": 1.0,
           "monotone": {"C": 0.2, "L1": 0.1}, "bounds": {"M_star": 1.0}}
    code = main(["--config", write_cfg(tmp_path, cfg), "--mode", "check-hypotheses", "--out", str(out),
                 "--grid-n", "32"])
    assert code == 0
    rep = json.loads((out / "report.json").read_text())
    assert abs(rep["eta"] - 1.6 / math.gamma(1.5)) < 1e-12
    assert rep["hypotheses"]["eta_below_one"] is False
    assert not (out / "trajectory.csv").exists()


def test_strict_exit_on_falsified_hypothesis(tmp_path):
    # g = 1 - y needs C >= 1; C = 0 falsifies the lower-bound hypothesis
    cfg = {"problem": "custom", "custom": {"A": [[1.0]], "x0": 1.0, "g": {"const": 1.0, "y_coeff": -1.0}},
           "monotone": {"C": 0.0}}
    args = ["--config", write_cfg(tmp_path, cfg), "--mode", "check-hypotheses", "--grid-n", "16"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b"), "--strict"]) == 3
    rep = json.loads((tmp_path / "b" / "report.json").read_text())
    assert rep["hypotheses"]["A1"]["passed"] is False and rep["exit_code"] == 3


def test_verify_pair_mode(tmp_path):
    out = tmp_path / "out"
    cfg = {"problem": "heat1d", "heat1d": {"n_interior": 4}, "monotone": {"C": 0.5}}
    assert main(["--config", write_cfg(tmp_path, cfg), "--mode", "verify-pair", "--out", str(out),
                 "--grid-n", "16"]) == 0
    rep = json.loads((out / "report.json").read_text())
    assert rep["quasi_pair"]["passed"]


def test_convergence_study(tmp_path):
    out = tmp_path / "out"
    cfg = dict(CAPUTO, convergence={"grids": [64, 128, 256]})
    assert main(["--config", write_cfg(tmp_path, cfg), "--mode", "convergence-study", "--out", str(out)]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "nodes,weighted_error,ratio"
    errs = [float(line.split(",")[1]) for line in lines[1:]]
    assert errs[0] > errs[1] > errs[2]


def test_determinism(tmp_path):
    cfg_path = write_cfg(tmp_path, dict(CAPUTO, nu=0.5, impulses=[{"t": 0.4, "J": 0.5}]))
    for name in ("a", "b"):
        assert main(["--config", cfg_path, "--out", str(tmp_path / name), "--grid-n", "64", "--seed", "3"]) == 0
    for fname in ("trajectory.csv", "report.json"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()


def test_module_entry_point(tmp_path):
    cfg_path = write_cfg(tmp_path, dict(CAPUTO, nu=1.5))
    proc = subprocess.run([sys.executable, "-m", "hilfer_mono", "--config", cfg_path, "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 1
    assert "'nu'" in proc.stderr
