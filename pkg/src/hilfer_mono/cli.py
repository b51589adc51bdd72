"""Command-line front end.

    hilfer-mono --config run.json --mode solve --out results/

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 a hypothesis check was falsified and --strict was given.
"""

from __future__ import annotations

import argparse
import copy
import io
import json
import logging
import math
import os
import sys
import tempfile
import time

import numpy as np

from .monotone import (
    EvolutionProblem,
    MonotoneConfig,
    check_hypotheses,
    iterate_extremal,
    residual_fixed_point,
    verify_quasi_pair,
)
from .operators import FractionalOrder, Generator, OperatorBounds, estimate_bounds
from .problems import (
    Heat1DScenario,
    ScalarLinearScenario,
    build_heat1d,
    build_scalar,
    default_quasi_pair,
    scalar_trajectory,
)
from .quadrature import DEFAULT_NODES, PCTrajectory, weighted_norm
from .specfun import SeriesNonconvergence

log = logging.getLogger("hilfer_mono")

MODES = ("solve", "verify-pair", "check-hypotheses", "convergence-study")

DEFAULTS = {
    "problem": "scalar",
    "mu": 0.5,
    "nu": 0.5,
    "T": 1.0,
    "grid_n": DEFAULT_NODES,
    "scalar": {"a": 1.0, "c": 0.0, "x0": 1.0},
    "heat1d": {"n_interior": 16, "length": 1.0, "f": 1.0, "alpha": -0.5, "beta": 0.05, "x0_amp": 1.0},
    "custom": {},
    "impulses": [],
    "monotone": {"C": 0.0, "L": 0.0, "L1": 0.0, "M_k": None, "tol": 1e-8, "max_iter": 200,
                 "order_tol": None, "C_star": None, "L_star": None},
    "bounds": {"M_star": None, "N_tilde": 1.0},
    "quasi_pair": {"bound_scale": 5.0},
    "hypotheses": {"sample_budget": 200},
    "convergence": {"grids": [64, 128, 256, 512]},
}


class ConfigError(ValueError):
    pass


def _merge(base, over):
    out = copy.deepcopy(base)
    for key, val in over.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = val
    return out


def _num(cfg, path, lo=None, hi=None, lo_open=False, hi_open=False, allow_none=False):
    node = cfg
    for key in path.split("."):
        node = node[key]
    if node is None and allow_none:
        return None
    if isinstance(node, bool) or not isinstance(node, (int, float)) or not math.isfinite(node):
        raise ConfigError(f"field '{path}' must be a finite number, got {node!r}")
    bad = (lo is not None and (node <= lo if lo_open else node < lo)) or \
          (hi is not None and (node >= hi if hi_open else node > hi))
    if bad:
        lb = "(" if lo_open else "["
        rb = ")" if hi_open else "]"
        raise ConfigError(f"field '{path}'={node!r} outside {lb}{lo}, {hi}{rb}")
    return float(node)


def resolve_config(raw: dict, grid_n: int | None = None) -> dict:
    """Fill defaults and validate; raises ConfigError naming the offending field."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - set(DEFAULTS)
    if unknown:
        raise ConfigError(f"unknown field(s): {', '.join(sorted(unknown))}")
    cfg = _merge(DEFAULTS, raw)
    if grid_n is not None:
        cfg["grid_n"] = grid_n
    if cfg["problem"] not in ("scalar", "heat1d", "custom"):
        raise ConfigError(f"field 'problem' must be scalar, heat1d or custom, got {cfg['problem']!r}")
    _num(cfg, "mu", 0.0, 1.0, lo_open=True, hi_open=True)
    _num(cfg, "nu", 0.0, 1.0)
    _num(cfg, "T", 0.0, lo_open=True)
    if not isinstance(cfg["grid_n"], int) or cfg["grid_n"] < 2:
        raise ConfigError(f"field 'grid_n' must be an integer >= 2, got {cfg['grid_n']!r}")
    for key in ("C", "L1"):
        _num(cfg, f"monotone.{key}", 0.0)
    _num(cfg, "monotone.L")
    _num(cfg, "monotone.tol", 0.0, lo_open=True)
    if not isinstance(cfg["monotone"]["max_iter"], int) or cfg["monotone"]["max_iter"] < 1:
        raise ConfigError("field 'monotone.max_iter' must be an integer >= 1")
    for key in ("order_tol", "C_star", "L_star"):
        _num(cfg, f"monotone.{key}", allow_none=True)
    _num(cfg, "bounds.M_star", 1.0, allow_none=True)
    _num(cfg, "bounds.N_tilde", 1.0)
    _num(cfg, "quasi_pair.bound_scale", 0.0, lo_open=True)
    if not isinstance(cfg["impulses"], list):
        raise ConfigError("field 'impulses' must be a list")
    for i, imp in enumerate(cfg["impulses"]):
        if not isinstance(imp, dict) or "t" not in imp:
            raise ConfigError(f"field 'impulses[{i}]' needs a time 't'")
        _num({"t": imp["t"]}, "t", 0.0, cfg["T"], lo_open=True, hi_open=True)
    n_imp = len(cfg["impulses"])
    if cfg["monotone"]["M_k"] is None:
        cfg["monotone"]["M_k"] = [0.0] * n_imp
    if len(cfg["monotone"]["M_k"]) != n_imp:
        raise ConfigError(f"field 'monotone.M_k' must have {n_imp} entries")
    if cfg["problem"] == "custom" and "A" not in cfg["custom"]:
        raise ConfigError("field 'custom.A' is required for a custom problem")
    budget = cfg["hypotheses"]["sample_budget"]
    if not isinstance(budget, int) or budget < 100:
        raise ConfigError("field 'hypotheses.sample_budget' must be an integer >= 100")
    return cfg


def _affine(spec, d, name):
    """u -> const + B y - D z from {'const', 'y_coeff', 'z_coeff'} (scalars or arrays)."""
    try:
        const = np.broadcast_to(np.asarray(spec.get("const", 0.0), dtype=float), (d,)).copy()
    except ValueError as exc:
        raise ConfigError(f"field '{name}.const' does not fit dimension {d}") from exc
    coeffs = []
    for key in ("y_coeff", "z_coeff"):
        M = np.asarray(spec.get(key, 0.0), dtype=float)
        if M.ndim == 2 and M.shape != (d, d) or M.ndim == 1 and M.shape != (d,) or M.ndim > 2:
            raise ConfigError(f"field '{name}.{key}' does not fit dimension {d}")
        coeffs.append(M)
    return const, coeffs[0], coeffs[1]


def _apply_coeff(M, v):
    return M @ v if np.ndim(M) == 2 else M * v


def build_problem(cfg: dict):
    order = FractionalOrder(cfg["mu"], cfg["nu"])
    T = cfg["T"]
    kind = cfg["problem"]
    if kind == "scalar":
        sc = cfg["scalar"]
        imps = tuple((imp["t"], imp.get("J", 0.0)) for imp in cfg["impulses"])
        scen = ScalarLinearScenario(sc["a"], sc["c"], sc["x0"], order, T, imps)
        return build_scalar(scen), scen
    if kind == "heat1d":
        h = cfg["heat1d"]
        imps = tuple((imp["t"], imp.get("kappa", 0.0), imp.get("const", 0.0)) for imp in cfg["impulses"])
        scen = Heat1DScenario(n_interior=int(h["n_interior"]), length=h["length"], order=order, T=T,
                              f=h["f"], alpha=h["alpha"], beta=h["beta"], impulses=imps, x0_amp=h["x0_amp"])
        return build_heat1d(scen), scen
    cu = cfg["custom"]
    A = np.asarray(cu["A"], dtype=float)
    gen = Generator(A, symmetric_flag=bool(cu.get("symmetric", False)))
    d = gen.dim
    const, B, D = _affine(cu.get("g", {}), d, "custom.g")

    def g(t, y, z):
        return const + _apply_coeff(B, y) - _apply_coeff(D, z)

    imps = []
    for i, imp in enumerate(cfg["impulses"]):
        c_k, B_k, D_k = _affine(imp, d, f"impulses[{i}]")
        imps.append((imp["t"], (lambda c, Bk, Dk: lambda y, z: c + _apply_coeff(Bk, y) - _apply_coeff(Dk, z))(c_k, B_k, D_k)))
    x0 = np.broadcast_to(np.asarray(cu.get("x0", 0.0), dtype=float), (d,)).copy()
    return EvolutionProblem(gen, order, T, x0, g, imps, name="custom"), None


def _monotone_cfg(cfg):
    mc = cfg["monotone"]
    return MonotoneConfig(C=mc["C"], L=mc["L"], L1=mc["L1"], M_k=tuple(mc["M_k"]), tol=mc["tol"],
                          max_iter=mc["max_iter"], order_tol=mc["order_tol"], C_star=mc["C_star"],
                          L_star=mc["L_star"])


def _bounds(cfg, problem, mcfg):
    b = cfg["bounds"]
    if b["M_star"] is not None:
        return OperatorBounds(M_star=b["M_star"], N_tilde=b["N_tilde"]), None
    ts = np.linspace(0.0, problem.T, 33)
    M, bounds = estimate_bounds(problem.gen, mcfg.C, ts, N_tilde=b["N_tilde"])
    return bounds, M


def _fmt(x) -> str:
    return format(float(x), ".17g")


def trajectory_csv(y: PCTrajectory, z: PCTrajectory) -> str:
    g, lam, d = y.grid, y.lam, y.dim
    head = ["t", "k", "weight"] + [f"y_component_{i}" for i in range(d)] + [f"z_component_{i}" for i in range(d)]
    w = g.weights(lam)
    Y, Z = y.raw(), z.raw()
    buf = io.StringIO()
    buf.write(",".join(head) + "\n")
    for k in range(g.n_blocks):
        for j in range(1, g.m + 1):
            row = [_fmt(g.blocks[k, j]), str(k), _fmt(w[k, j])]
            row += [_fmt(v) for v in Y[k, j - 1]] + [_fmt(v) for v in Z[k, j - 1]]
            buf.write(",".join(row) + "\n")
    return buf.getvalue()


def _clean(obj):
    """JSON-safe copy: numpy scalars to float, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def _atomic_write(path: str, text: str):
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _report_text(report: dict) -> str:
    return json.dumps(_clean(report), indent=2, sort_keys=True) + "\n"


def run(cfg: dict, mode: str, out_dir: str, strict: bool = False, seed: int = 0) -> int:
    """Execute one mode; writes files under out_dir and returns the exit code."""
    os.makedirs(out_dir, exist_ok=True)
    clock = {}
    t_start = time.perf_counter()
    problem, scen = build_problem(cfg)
    mcfg = _monotone_cfg(cfg)
    bounds, M_est = _bounds(cfg, problem, mcfg)
    grid = problem.grid(cfg["grid_n"])
    report = {
        "config": cfg,
        "mode": mode,
        "seed": seed,
        "eta": None,
        "iterations": None,
        "converged": None,
        "unique": None,
        "residual": None,
        "violations": None,
        # wall-clock times go to timings.json so that this report stays reproducible
        "timings": {"grid_nodes": int(grid.out_times.size), "wall_clock_file": "timings.json"},
        "bounds": {"M_star": bounds.M_star, "N_tilde": bounds.N_tilde, "M_estimated": M_est},
    }
    code = 0
    falsified = False

    if mode == "convergence-study":
        if scen is None or not isinstance(scen, ScalarLinearScenario):
            raise ConfigError("field 'problem' must be 'scalar' for convergence-study")
        rows = []
        for n in cfg["convergence"]["grids"]:
            t0 = time.perf_counter()
            gr = problem.grid(int(n))
            x = problem.zero(gr)
            y, _, rep = iterate_extremal(problem, mcfg, x, x)
            ex = scalar_trajectory(scen, gr)
            err = float(np.max(np.abs(y.W[:, 1:] - ex.W[:, 1:])))
            rows.append({"nodes": int(n), "weighted_error": err, "iterations": rep.iterations})
            clock[f"grid_{n}"] = time.perf_counter() - t0
        for prev, cur in zip(rows, rows[1:]):
            cur["ratio"] = prev["weighted_error"] / cur["weighted_error"] if cur["weighted_error"] > 0 else None
        report["convergence"] = rows
        text = "nodes,weighted_error,ratio\n" + "".join(
            f"{r['nodes']},{_fmt(r['weighted_error'])},{'' if r.get('ratio') is None else _fmt(r['ratio'])}\n"
            for r in rows)
        _atomic_write(os.path.join(out_dir, "convergence.csv"), text)
    else:
        t0 = time.perf_counter()
        y0, z0, pair = default_quasi_pair(problem, cfg["quasi_pair"]["bound_scale"], mcfg, grid=grid)
        clock["quasi_pair"] = time.perf_counter() - t0
        report["quasi_pair"] = pair
        if not pair["passed"]:
            falsified = True
        if mode in ("check-hypotheses", "solve"):
            t0 = time.perf_counter()
            hyp = check_hypotheses(problem, mcfg, bounds, cfg["hypotheses"]["sample_budget"], y0, z0, seed=seed)
            clock["hypotheses"] = time.perf_counter() - t0
            report["hypotheses"] = hyp
            report["eta"] = hyp["eta"]
            if not hyp["passed"]:
                falsified = True
        if mode == "solve":
            t0 = time.perf_counter()
            y, z, rep = iterate_extremal(problem, mcfg, y0, z0)
            clock["iteration"] = time.perf_counter() - t0
            report.update(
                iterations=rep.iterations,
                converged=rep.converged,
                unique=rep.unique,
                violations=rep.ordering_violations,
                residual={"y_min": residual_fixed_point(problem, mcfg, y),
                          "z_max": residual_fixed_point(problem, mcfg, z)},
            )
            report["iteration"] = rep.as_dict()
            report["gap"] = weighted_norm(z - y)
            if any(v > 0 for v in rep.ordering_violations):
                falsified = True
            _atomic_write(os.path.join(out_dir, "trajectory.csv"), trajectory_csv(y, z))
            if rep.diverged:
                code = 2
    if strict and falsified and code == 0:
        code = 3
    report["exit_code"] = code
    _atomic_write(os.path.join(out_dir, "report.json"), _report_text(report))
    clock["total"] = time.perf_counter() - t_start
    _atomic_write(os.path.join(out_dir, "timings.json"), json.dumps(clock, indent=2, sort_keys=True) + "\n")
    return code


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="hilfer-mono", description=__doc__.splitlines()[0])
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--mode", choices=MODES, default="solve")
    ap.add_argument("--out", default="out", help="output directory")
    ap.add_argument("--strict", action="store_true", help="exit 3 when a hypothesis check is falsified")
    ap.add_argument("--seed", type=int, default=0, help="seed for Monte-Carlo hypothesis sampling")
    ap.add_argument("--grid-n", type=int, default=None, help="nodes per impulse block")
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
        cfg = resolve_config(raw, args.grid_n)
        problem_check = build_problem(cfg)  # surfaces constructor errors as config errors
        del problem_check
    except (OSError, json.JSONDecodeError, ConfigError, ValueError, TypeError, KeyError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        return run(cfg, args.mode, args.out, strict=args.strict, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (SeriesNonconvergence, FloatingPointError, OverflowError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
