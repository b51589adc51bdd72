"""The mild-solution operator G and the coupled monotone iteration.

    G(y, z)(t) = S*(t) x0 + sum_{t_i < t} S*(t - t_i) phi_i(y(t_i), z(t_i))
                 + int_0^t (t-s)^(mu-1) P*(t-s) [g(s, y, z) + (C+L) y - L z] ds

with S*, P* built from R(t) = exp(-Ct) exp(-tA). Starting from an ordered
pair y0 <= z0, the iteration y_p = G(y_{p-1}, z_{p-1}), z_p = G(z_{p-1}, y_{p-1})
squeezes the extremal solutions.
"""

from __future__ import annotations

import logging
import time
import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import _weights
from .operators import FractionalOrder, Generator, ModalFamily, OperatorBounds
from .quadrature import DEFAULT_NODES, ConvolutionRule, PCTrajectory, TimeGrid, weighted_norm
from .specfun import gamma

log = logging.getLogger(__name__)

__all__ = [
    "MonotoneConfig",
    "EvolutionProblem",
    "IterationReport",
    "OrderingError",
    "MildOperator",
    "apply_G",
    "iterate_extremal",
    "verify_quasi_pair",
    "check_hypotheses",
    "order_leq",
    "residual_fixed_point",
    "eta_value",
    "partition_count",
    "a2star_rhs",
]


class OrderingError(ValueError):
    """The initial pair is not ordered."""


@dataclass(frozen=True)
class MonotoneConfig:
    C: float = 0.0
    L: float = 0.0
    L1: float = 0.0
    M_k: tuple = ()
    tol: float = 1e-8
    max_iter: int = 200
    order_tol: float | None = None  # None: 1e-9 * (1 + weighted scale of the pair)
    C_star: float | None = None
    L_star: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "M_k", tuple(float(v) for v in self.M_k))
        if self.C < 0:
            raise ValueError("C must be >= 0")
        if self.L1 < 0:
            raise ValueError("L1 must be >= 0")
        if any(v < 0 for v in self.M_k):
            raise ValueError("M_k entries must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.L < 0:
            warnings.warn(
                "L < 0 was given; G uses g + (C+L)y - Lz, which is mixed monotone for L >= 0",
                stacklevel=2,
            )


@dataclass(frozen=True, eq=False)
class EvolutionProblem:
    """x0 is the weighted initial datum; impulses are (t_k, phi_k(y, z)) pairs."""

    gen: Generator
    order: FractionalOrder
    T: float
    x0: np.ndarray
    g: Callable
    impulses: Sequence = ()
    name: str = "custom"
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        x0 = np.atleast_1d(np.asarray(self.x0, dtype=float))
        if x0.shape != (self.gen.dim,):
            raise ValueError(f"x0 has shape {x0.shape}, expected ({self.gen.dim},)")
        object.__setattr__(self, "x0", x0)
        object.__setattr__(self, "impulses", tuple((float(t), f) for t, f in self.impulses))
        times = [t for t, _ in self.impulses]
        if any(not 0 < t < self.T for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("impulse times must be strictly increasing inside (0, T)")

    @property
    def dim(self) -> int:
        return self.gen.dim

    @property
    def impulse_times(self) -> tuple:
        return tuple(t for t, _ in self.impulses)

    def grid(self, m: int = DEFAULT_NODES) -> TimeGrid:
        key = ("grid", m)
        if key not in self._cache:
            self._cache[key] = TimeGrid.build(self.T, self.impulse_times, m, self.order.lam)
        return self._cache[key]

    def zero(self, grid: TimeGrid) -> PCTrajectory:
        return PCTrajectory(grid, self.order.lam, np.zeros(grid.blocks.shape + (self.dim,)))


class MildOperator:
    """Discrete G on a fixed grid with the shift C.

    The propagated pieces S*(t - t_i) are tabulated once per impulse origin in
    modal coordinates; the convolution weights are assembled on first use.
    """

    def __init__(self, problem: EvolutionProblem, C: float, grid: TimeGrid):
        self.problem = problem
        self.grid = grid
        self.C = float(C)
        self.order = problem.order
        self.family = ModalFamily(problem.gen, C, problem.order)
        self.conv = ConvolutionRule(self.family, grid, problem.order.lam)
        self.weights = grid.weights(problem.order.lam)
        self.s_limit = self.family.weighted_limit
        self._origin = [self._propagated(i) for i in range(grid.n_blocks)]

    def _propagated(self, i: int) -> np.ndarray:
        """S*(t - t_i) symbols at the output nodes; zero before t_i."""
        g, fam = self.grid, self.family
        mu, alpha = self.order.mu, self.order.alpha
        nodes = g.nodes[i * g.m:]
        t0 = nodes[0]
        lags = nodes - t0
        F = np.zeros((nodes.size, fam.kappa.size), dtype=fam.kappa.dtype)
        F[1:] = fam.p_symbol(lags[1:])
        F[0] = fam.p_symbol([0.0])[0]
        out = np.zeros((g.n_blocks, g.m, fam.kappa.size), dtype=fam.kappa.dtype)
        ga = gamma(alpha) if alpha > 0 else 1.0
        for k in range(i, g.n_blocks):
            for j in range(1, g.m + 1):
                loc = (k - i) * g.m + j
                t = nodes[loc]
                if alpha == 0.0:
                    out[k, j - 1] = lags[loc] ** (mu - 1.0) * F[loc]
                else:
                    w = _weights.hat_weights(t, t0, nodes[: loc + 1], alpha, mu, r=mu) / ga
                    out[k, j - 1] = w @ F[: loc + 1]
        return out

    def _forcing(self, y: PCTrajectory, z: PCTrajectory, C: float, L: float) -> np.ndarray:
        """Weighted samples v = (s - t_b)^(1-lam) [g + (C+L)y - Lz] on every block node."""
        g, lam = self.grid, self.order.lam
        fn = self.problem.g
        Y, Z = y.raw(), z.raw()
        gv = np.empty_like(Y)
        for k in range(g.n_blocks):
            for j in range(g.m):
                val = np.asarray(fn(g.blocks[k, j + 1], Y[k, j], Z[k, j]), dtype=float)
                if not np.all(np.isfinite(val)):
                    raise FloatingPointError(
                        f"g returned a non-finite value at t={g.blocks[k, j + 1]!r} (block {k}, node {j + 1})"
                    )
                gv[k, j] = val
        v = np.empty_like(y.W)
        v[:, 1:] = self.weights[:, 1:, None] * gv + (C + L) * y.W[:, 1:] - L * z.W[:, 1:]
        if lam < 1.0:
            # constant extension from the first interior node keeps v monotone in (y, z)
            v[:, 0] = v[:, 1]
        else:
            for k in range(g.n_blocks):
                v[k, 0] = fn(g.blocks[k, 0], y.W[k, 0], z.W[k, 0]) + (C + L) * y.W[k, 0] - L * z.W[k, 0]
        return v

    def apply(self, y: PCTrajectory, z: PCTrajectory, L: float) -> PCTrajectory:
        g, fam, lam = self.grid, self.family, self.order.lam
        if not (y.grid.same_as(g) and z.grid.same_as(g)):
            raise ValueError("trajectories are not on the operator grid")
        c0 = fam.to_modal(self.problem.x0)
        modal = self._origin[0] * c0
        n_imp = g.n_blocks - 1
        jump_modal = np.zeros((n_imp, fam.kappa.size), dtype=modal.dtype)
        for k, (_, phi) in enumerate(self.problem.impulses, start=1):
            val = np.asarray(phi(y.left_raw(k), z.left_raw(k)), dtype=float)
            if not np.all(np.isfinite(val)):
                raise FloatingPointError(f"impulse {k} returned a non-finite value")
            ck = fam.to_modal(val)
            modal = modal + self._origin[k] * ck
            jump_modal[k - 1] = self.s_limit * ck
        v = self._forcing(y, z, self.C, L)
        if np.any(v):
            vm = fam.to_modal(v.reshape(-1, fam.dim)).reshape(v.shape)
            modal = modal + self.conv.apply_modal(vm).reshape(modal.shape)
        raw = fam.from_modal(modal)
        W = np.empty(g.blocks.shape + (fam.dim,))
        W[:, 1:] = raw * self.weights[:, 1:, None]
        jumps = fam.from_modal(jump_modal) if n_imp else np.zeros((0, fam.dim))
        W[0, 0] = fam.from_modal(self.s_limit * c0)
        for k in range(1, g.n_blocks):
            W[k, 0] = jumps[k - 1] + (W[k - 1, -1] if lam == 1.0 else 0.0)
        return PCTrajectory(g, lam, W, jumps)


def _operator(problem: EvolutionProblem, cfg: MonotoneConfig, grid: TimeGrid) -> MildOperator:
    key = ("G", cfg.C, id(grid))
    op = problem._cache.get(key)
    if op is None or op.grid is not grid:
        t0 = time.perf_counter()
        op = MildOperator(problem, cfg.C, grid)
        problem._cache[key] = op
        log.debug("built G operator in %.2fs", time.perf_counter() - t0)
    return op


def apply_G(problem: EvolutionProblem, cfg: MonotoneConfig, y: PCTrajectory, z: PCTrajectory) -> PCTrajectory:
    if not y.grid.same_as(z.grid):
        raise ValueError("y and z live on different grids")
    return _operator(problem, cfg, y.grid).apply(y, z, cfg.L)


def order_leq(u: PCTrajectory, v: PCTrajectory, order_tol: float = 0.0):
    """(u <= v + order_tol everywhere, most negative entry of v - u, its location)."""
    if not u.grid.same_as(v.grid) or u.W.shape != v.W.shape:
        raise ValueError("trajectories live on different grids")
    diff = v.W - u.W
    idx = np.unravel_index(int(np.argmin(diff)), diff.shape)
    worst = min(0.0, float(diff[idx]))
    ok = worst >= -order_tol
    witness = None
    if worst < 0:
        k, j, c = (int(i) for i in idx)
        witness = {"block": k, "node": j, "component": c, "t": float(u.grid.blocks[k, j]), "value": worst}
    return ok, worst, witness


def _order_tol(cfg: MonotoneConfig, *trajs) -> float:
    if cfg.order_tol is not None:
        return cfg.order_tol
    return 1e-9 * (1.0 + max(weighted_norm(x) for x in trajs))


@dataclass
class IterationReport:
    iterations: int = 0
    history: list = field(default_factory=list)
    ordering_violations: list = field(default_factory=list)
    eta: float | None = None
    converged: bool = False
    unique: bool = False
    diverged: bool = False
    order_tol: float = 0.0
    message: str = ""

    def as_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "history": self.history,
            "ordering_violations": self.ordering_violations,
            "eta": self.eta,
            "converged": self.converged,
            "unique": self.unique,
            "diverged": self.diverged,
            "order_tol": self.order_tol,
            "message": self.message,
        }


def iterate_extremal(problem: EvolutionProblem, cfg: MonotoneConfig, y0: PCTrajectory, z0: PCTrajectory,
                     bounds: OperatorBounds | None = None):
    """Run the coupled iteration from the ordered pair (y0, z0).

    Returns (y_last, z_last, report). The sandwich y_{p-1} <= y_p <= z_p <= z_{p-1}
    is checked every step and its worst violation recorded; nothing aborts on
    a violation. Divergence means the gap grew five iterations in a row.
    """
    otol = _order_tol(cfg, y0, z0)
    ok, worst, witness = order_leq(y0, z0, otol)
    if not ok:
        raise OrderingError(f"initial pair is not ordered: z0 - y0 reaches {worst:.3e} at {witness}")
    rep = IterationReport(order_tol=otol)
    if bounds is not None:
        rep.eta = eta_value(problem, cfg, bounds)
    y, z = y0, z0
    prev_gap, growth = weighted_norm(z - y), 0
    for p in range(1, cfg.max_iter + 1):
        y_new = apply_G(problem, cfg, y, z)
        z_new = apply_G(problem, cfg, z, y)
        dy = weighted_norm(y_new - y)
        dz = weighted_norm(z_new - z)
        gap = weighted_norm(z_new - y_new)
        worst = min(order_leq(y, y_new)[1], order_leq(y_new, z_new)[1], order_leq(z_new, z)[1])
        rep.history.append({"dy": dy, "dz": dz, "gap": gap})
        rep.ordering_violations.append(-worst if worst < -otol else 0.0)
        rep.iterations = p
        y, z = y_new, z_new
        growth = growth + 1 if gap > prev_gap else 0
        prev_gap = gap
        if dy <= cfg.tol and dz <= cfg.tol:
            rep.converged = True
            break
        if growth >= 5:
            rep.diverged = True
            rep.message = f"gap grew for 5 consecutive iterations (gap={gap:.3e})"
            break
    rep.unique = rep.converged and prev_gap <= cfg.tol
    if not rep.message:
        rep.message = "converged" if rep.converged else f"max_iter={cfg.max_iter} reached"
    return y, z, rep


def residual_fixed_point(problem: EvolutionProblem, cfg: MonotoneConfig, x: PCTrajectory) -> float:
    """Weighted norm of G(x, x) - x."""
    return weighted_norm(apply_G(problem, cfg, x, x) - x)


def verify_quasi_pair(problem: EvolutionProblem, cfg: MonotoneConfig, y0: PCTrajectory, z0: PCTrajectory) -> dict:
    """Mild-form check of y0 <= G(y0, z0) and G(z0, y0) <= z0."""
    otol = _order_tol(cfg, y0, z0)
    ok_pair, w_pair, wit_pair = order_leq(y0, z0, otol)
    ok_lo, d_low, wit_lo = order_leq(y0, apply_G(problem, cfg, y0, z0), otol)
    ok_up, d_up, wit_up = order_leq(apply_G(problem, cfg, z0, y0), z0, otol)
    return {
        "passed": bool(ok_pair and ok_lo and ok_up),
        "ordered": bool(ok_pair),
        "min_order_gap": w_pair,
        "min_d_low": d_low,
        "min_d_up": d_up,
        "witness": wit_pair or wit_lo or wit_up,
        "order_tol": otol,
    }


def eta_value(problem: EvolutionProblem, cfg: MonotoneConfig, bounds: OperatorBounds, T: float | None = None) -> float:
    """4 M* (sum M_i T^(lam-1)/Gamma(lam) + (2 L1 + C) T^mu / Gamma(mu+1))."""
    T = problem.T if T is None else T
    mu, lam = problem.order.mu, problem.order.lam
    return _eta(bounds.M_star, sum(cfg.M_k), cfg.L1, cfg.C, T, mu, lam)


def _eta(M_star, sum_M, L1, C, T, mu, lam):
    return 4.0 * M_star * (sum_M * T ** (lam - 1.0) / gamma(lam) + (2.0 * L1 + C) * T**mu / gamma(mu + 1.0))


def partition_count(problem: EvolutionProblem, cfg: MonotoneConfig, bounds: OperatorBounds,
                    n_max: int = 100000) -> int | None:
    """Smallest n such that eta over pieces of length T/n is below 1, or None."""
    mu, lam = problem.order.mu, problem.order.lam
    h = problem.T / np.arange(1, n_max + 1, dtype=float)
    vals = _eta(bounds.M_star, sum(cfg.M_k), cfg.L1, cfg.C, h, mu, lam)
    hit = np.nonzero(vals < 1.0)[0]
    return int(hit[0] + 1) if hit.size else None


def a2star_rhs(problem: EvolutionProblem, cfg: MonotoneConfig, bounds: OperatorBounds) -> dict:
    """Right-hand side of the bound on sum M_k, with Gamma(mu-1) as printed and
    with Gamma(mu+1)."""
    mu, lam, T = problem.order.mu, problem.order.lam, problem.T
    Ms = bounds.M_star
    num = gamma(lam) * gamma(mu + 1.0) - 4.0 * Ms * (2.0 * cfg.L1 + cfg.C) * T**mu
    out = {}
    for label, gval in (("gamma_mu_minus_1", gamma(mu - 1.0)), ("gamma_mu_plus_1", gamma(mu + 1.0))):
        rhs = num / (4.0 * Ms * T ** (lam - 1.0) * gval)
        out[label] = {"rhs": rhs, "passed": bool(sum(cfg.M_k) <= rhs)}
    out["sum_M_k"] = sum(cfg.M_k)
    return out


def _sample_box(rng, lo, hi, n):
    """n ordered quadruples y1 <= y2, z2 <= z1 inside [lo, hi] (componentwise)."""
    span = hi - lo
    u = rng.random((4, n) + lo.shape[-1:])
    y1 = lo + u[0] * span
    y2 = y1 + u[1] * (hi - y1)
    z1 = lo + u[2] * span
    z2 = lo + u[3] * (z1 - lo)
    return y1, y2, z1, z2


def check_hypotheses(problem: EvolutionProblem, cfg: MonotoneConfig, bounds: OperatorBounds,
                     sample_budget: int = 200, y0: PCTrajectory | None = None,
                     z0: PCTrajectory | None = None, seed: int | None = 0, atol: float = 1e-12) -> dict:
    """Falsification report for the structural hypotheses plus the eta arithmetic.

    Ordered quadruples are drawn inside [y0(t), z0(t)] at random nodes (raw
    values); without a pair the unit box [0, 1]^d is used.
    """
    if sample_budget < 100:
        raise ValueError("sample_budget must be >= 100")
    rng = np.random.default_rng(seed)
    order, d = problem.order, problem.dim
    C, L = cfg.C, cfg.L
    report = {"mu": order.mu, "nu": order.nu, "lambda": order.lam, "notes": []}
    if L < 0:
        report["notes"].append("L < 0 supplied; the canonical sign here is L >= 0")
    report["notes"].append("L1 is taken >= 0 in both the A(3) and A(3*) readings")

    if y0 is not None and z0 is not None:
        lo_all = y0.raw().reshape(-1, d)
        hi_all = z0.raw().reshape(-1, d)
        times = y0.grid.out_times
    else:
        times = np.linspace(0.0, problem.T, 101)[1:]
        lo_all = np.zeros((times.size, d))
        hi_all = np.ones((times.size, d))

    pick = rng.integers(0, times.size, sample_budget)
    lo, hi = lo_all[pick], hi_all[pick]
    y1, y2, z1, z2 = _sample_box(rng, lo, hi, sample_budget)

    def gv(i, a, b):
        return np.asarray(problem.g(times[pick[i]], a, b), dtype=float)

    worst1 = (np.inf, None)
    worst5 = (np.inf, None)
    for i in range(sample_budget):
        diff = gv(i, y2[i], z2[i]) - gv(i, y1[i], z1[i])
        lower = -C * (y2[i] - y1[i]) - L * (z1[i] - z2[i])
        m1 = float(np.min(diff - lower))
        if m1 < worst1[0]:
            worst1 = (m1, i)
        if cfg.C_star is not None and cfg.L_star is not None:
            upper = cfg.C_star * (y2[i] - y1[i]) + cfg.L_star * (z1[i] - z2[i])
            m5 = float(np.min(upper - diff))
            if m5 < worst5[0]:
                worst5 = (m5, i)

    def witness(i):
        return {"t": float(times[pick[i]]), "y1": y1[i].tolist(), "y2": y2[i].tolist(),
                "z1": z1[i].tolist(), "z2": z2[i].tolist()}

    report["A1"] = {"passed": bool(worst1[0] >= -atol), "min_margin": worst1[0],
                    "witness": witness(worst1[1]) if worst1[0] < -atol else None}
    if cfg.C_star is not None and cfg.L_star is not None:
        report["A5"] = {"passed": bool(worst5[0] >= -atol), "min_margin": worst5[0],
                        "witness": witness(worst5[1]) if worst5[0] < -atol else None}

    # impulses are sampled over the left-limit range at t_k
    imp = []
    for k, (tk, phi) in enumerate(problem.impulses, start=1):
        if y0 is not None and z0 is not None:
            lo_k = y0.left_raw(k)[None, :].repeat(sample_budget, 0)
            hi_k = z0.left_raw(k)[None, :].repeat(sample_budget, 0)
        else:
            lo_k, hi_k = np.zeros((sample_budget, d)), np.ones((sample_budget, d))
        a1, a2, b1, b2 = _sample_box(rng, lo_k, hi_k, sample_budget)
        margins = [float(np.min(np.asarray(phi(a2[i], b2[i])) - np.asarray(phi(a1[i], b1[i]))))
                   for i in range(sample_budget)]
        i_min = int(np.argmin(margins))
        imp.append({"k": k, "t_k": tk, "passed": bool(margins[i_min] >= -atol), "min_margin": margins[i_min],
                    "witness": None if margins[i_min] >= -atol else
                    {"y1": a1[i_min].tolist(), "y2": a2[i_min].tolist(), "z1": b1[i_min].tolist(), "z2": b2[i_min].tolist()}})
    report["A2"] = {"passed": all(r["passed"] for r in imp), "impulses": imp}

    eta = eta_value(problem, cfg, bounds)
    report["eta"] = eta
    report["eta_below_one"] = bool(eta < 1.0)
    report["partition_n"] = 1 if eta < 1.0 else partition_count(problem, cfg, bounds)
    report["A2star"] = a2star_rhs(problem, cfg, bounds)
    report["passed"] = bool(report["A1"]["passed"] and report["A2"]["passed"]
                            and report.get("A5", {"passed": True})["passed"])
    return report
