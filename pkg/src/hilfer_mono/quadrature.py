"""Impulse-aware time grids, piecewise weighted trajectories and product rules.

A trajectory on [0, T] with impulses at t_1 < ... < t_l is stored block by
block. Block k covers [t_k, t_{k+1}] with m + 1 nodes graded toward t_k, and
holds the *weighted* values (t - t_k)^(1-lambda) x(t). Node j = 0 of each
block is the right-limit record at t_k, node j = m the left limit at t_{k+1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _weights
from .operators import FractionalOrder, Generator, ModalFamily
from .specfun import SeriesNonconvergence, gamma

__all__ = [
    "DEFAULT_NODES",
    "TimeGrid",
    "PCTrajectory",
    "frac_integral",
    "volterra_convolve",
    "ConvolutionRule",
    "weighted_norm",
    "gronwall_bound",
]

DEFAULT_NODES = 512


@dataclass(frozen=True, eq=False)
class TimeGrid:
    T: float
    impulse_times: tuple
    m: int
    q: float
    blocks: np.ndarray  # (n_blocks, m + 1) node times

    @classmethod
    def build(cls, T: float, impulse_times=(), m: int = DEFAULT_NODES, lam: float = 1.0,
              q: float | None = None) -> "TimeGrid":
        """Equal node count per block; grading exponent q = max(2, 1/lam) by default."""
        if not T > 0:
            raise ValueError("horizon T must be > 0")
        if m < 2:
            raise ValueError("need at least 2 nodes per block")
        taus = tuple(float(t) for t in impulse_times)
        edges = (0.0,) + taus + (float(T),)
        if any(b <= a for a, b in zip(edges[:-1], edges[1:])):
            raise ValueError("impulse times must be strictly increasing inside (0, T)")
        if q is None:
            q = max(2.0, 1.0 / lam)
        frac = (np.arange(m + 1) / m) ** q
        blocks = np.empty((len(edges) - 1, m + 1))
        for k, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
            blocks[k] = a + (b - a) * frac
            blocks[k, 0], blocks[k, -1] = a, b
        blocks.setflags(write=False)
        return cls(float(T), taus, int(m), float(q), blocks)

    @property
    def n_blocks(self) -> int:
        return self.blocks.shape[0]

    @property
    def starts(self) -> np.ndarray:
        return self.blocks[:, 0]

    @property
    def nodes(self) -> np.ndarray:
        """All distinct node times, 0 included; t_k sits at index k * m."""
        return np.concatenate([self.blocks[0], self.blocks[1:, 1:].ravel()])

    @property
    def impulse_indices(self) -> list:
        return [k * self.m for k in range(1, self.n_blocks)]

    @property
    def out_times(self) -> np.ndarray:
        """Times of the nodes j >= 1 of every block, in block order."""
        return self.blocks[:, 1:].ravel()

    def weights(self, lam: float) -> np.ndarray:
        """(t - t_k)^(1-lam) on every node; 1 at j = 0 where records are stored."""
        w = (self.blocks - self.starts[:, None]) ** (1.0 - lam)
        w[:, 0] = 1.0
        return w

    def block_of(self, t: float) -> int:
        """Block index k with t_k < t <= t_{k+1}."""
        k = int(np.searchsorted(self.starts, t, side="left")) - 1
        return max(k, 0)

    def locate(self, t: float, atol: float = 0.0):
        """(k, j) of the node equal to t (left-limit convention at t_k)."""
        k = self.block_of(t)
        j = int(np.argmin(np.abs(self.blocks[k] - t)))
        if abs(self.blocks[k, j] - t) > atol:
            raise ValueError(f"t={t!r} is not a grid node")
        return k, j

    def same_as(self, other: "TimeGrid") -> bool:
        return self is other or (
            self.blocks.shape == other.blocks.shape and np.array_equal(self.blocks, other.blocks)
        )


@dataclass(frozen=True, eq=False)
class PCTrajectory:
    """Weighted block values W[k, j, :] = (t - t_k)^(1-lam) x(t).

    W[k, 0] records the limit of (t - t_k)^(1-lam) x(t) as t -> t_k+, which
    stays finite even when x itself blows up there. ``jumps[k-1]`` is the
    weighted jump recorded at impulse k.
    """

    grid: TimeGrid
    lam: float
    W: np.ndarray
    jumps: np.ndarray | None = None

    def __post_init__(self):
        W = np.asarray(self.W, dtype=float)
        if W.ndim == 2:
            W = W[:, :, None]
        if W.shape[:2] != self.grid.blocks.shape:
            raise ValueError(f"values of shape {W.shape} do not fit grid {self.grid.blocks.shape}")
        if not np.all(np.isfinite(W)):
            bad = np.argwhere(~np.isfinite(W))[0]
            raise FloatingPointError(f"non-finite trajectory value at block {bad[0]}, node {bad[1]}")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        if self.jumps is None:
            object.__setattr__(self, "jumps", np.zeros((self.grid.n_blocks - 1, W.shape[2])))

    @property
    def dim(self) -> int:
        return self.W.shape[2]

    @classmethod
    def from_function(cls, grid: TimeGrid, lam: float, fn, right_limits=None):
        """Sample raw x = fn(t) at nodes j >= 1; ``right_limits[k]`` gives the
        weighted records at t_k (default: copied from node j = 1)."""
        vals = []
        w = grid.weights(lam)
        for k in range(grid.n_blocks):
            rows = [np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in grid.blocks[k, 1:]]
            rows = np.array(rows) * w[k, 1:, None]
            rec = rows[0] if right_limits is None else np.atleast_1d(right_limits[k])
            vals.append(np.vstack([rec, rows]))
        return cls(grid, lam, np.array(vals))

    @classmethod
    def constant_weighted(cls, grid: TimeGrid, lam: float, value):
        """Weighted value constant in every block, i.e. x = value (t - t_k)^(lam-1)."""
        value = np.atleast_1d(np.asarray(value, dtype=float))
        W = np.broadcast_to(value, grid.blocks.shape + value.shape).copy()
        return cls(grid, lam, W)

    def raw(self) -> np.ndarray:
        """Raw values at nodes j >= 1, shape (n_blocks, m, d)."""
        return self.W[:, 1:] / self.grid.weights(self.lam)[:, 1:, None]

    def left_raw(self, k: int) -> np.ndarray:
        """x(t_k) as the left limit at impulse k >= 1."""
        g = self.grid
        return self.W[k - 1, -1] / (g.blocks[k - 1, -1] - g.blocks[k - 1, 0]) ** (1.0 - self.lam)

    def at(self, t: float) -> np.ndarray:
        k, j = self.grid.locate(t, atol=1e-14 * max(1.0, self.grid.T))
        if j == 0:
            raise ValueError("t = t_k has only a weighted record; use W[k, 0]")
        return self.W[k, j] / self.grid.weights(self.lam)[k, j]

    def _check(self, other):
        if not self.grid.same_as(other.grid) or self.W.shape != other.W.shape:
            raise ValueError("trajectories live on different grids")

    def __add__(self, other):
        self._check(other)
        return PCTrajectory(self.grid, self.lam, self.W + other.W, self.jumps + other.jumps)

    def __sub__(self, other):
        self._check(other)
        return PCTrajectory(self.grid, self.lam, self.W - other.W, self.jumps - other.jumps)

    def __mul__(self, s):
        return PCTrajectory(self.grid, self.lam, s * self.W, s * self.jumps)

    __rmul__ = __mul__


def weighted_norm(x: PCTrajectory) -> float:
    """max_k sup_t (t - t_k)^(1-lam) |x(t)|_inf; the j = 0 record stands for t_k^+."""
    if x.W.size == 0:
        raise ValueError("empty trajectory")
    return float(np.max(np.abs(x.W)))


def frac_integral(alpha: float, nodes, samples, t_eval: float) -> np.ndarray:
    """(1/Gamma(alpha)) int_0^t (t - s)^(alpha-1) f(s) ds, f piecewise linear.

    ``nodes`` is the increasing node array starting at 0 and ``samples`` are the
    values f(nodes) (scalar or state valued). t_eval must be one of the nodes.
    Any alpha > 0 is accepted.
    """
    if not alpha > 0:
        raise ValueError("alpha must be > 0")
    nodes = np.asarray(nodes, dtype=float)
    samples = np.asarray(samples, dtype=float)
    idx = int(np.searchsorted(nodes, t_eval))
    if idx >= nodes.size or not math.isclose(nodes[idx], t_eval, rel_tol=0, abs_tol=1e-14 * max(1.0, abs(t_eval))):
        raise ValueError(f"t_eval={t_eval!r} is not a node")
    if idx == 0:
        return np.zeros(samples.shape[1:])
    t = nodes[idx]
    w = _weights.hat_weights(t, nodes[0], nodes[: idx + 1], alpha, 1.0, r=1.0) / gamma(alpha)
    return np.tensordot(w, samples[: idx + 1], axes=1)


class ConvolutionRule:
    """Product rule for int_0^t (t-s)^(mu-1) P*(t-s) h(s) ds on a TimeGrid.

    In block b the forcing is represented as h(s) = v(s) (s - t_b)^(q-1) with v
    linear between nodes; the two power factors are integrated exactly and P*
    is frozen on each interval at the midpoint of the lag in the variable
    lag^mu. ``q = lam`` matches weighted trajectories, ``q = 1`` raw data.

    Row n of the assembled operator maps the sample array v (n_blocks, m+1)
    to the convolution at output node n (node j >= 1 of its block).
    """

    def __init__(self, family: ModalFamily, grid: TimeGrid, q: float):
        self.family = family
        self.grid = grid
        self.q = float(q)
        self._omega = None

    def row(self, k: int, j: int) -> np.ndarray:
        """Modal nodal weights for output node (k, j); shape (n_blocks*(m+1), d)."""
        g = self.grid
        mu = self.family.order.mu
        t = g.blocks[k, j]
        m1 = g.m + 1
        out = np.zeros((g.n_blocks * m1, self.family.kappa.size), dtype=self.family.kappa.dtype)
        for b in range(k + 1):
            stop = j if b == k else g.m
            nodes = g.blocks[b, : stop + 1]
            left, right = _weights.interval_hat_moments(t, nodes[0], nodes, mu, self.q, r=1.0)
            F = self.family.p_symbol(_weights.kernel_midpoints(t, nodes, mu))
            base = b * m1
            out[base: base + stop] += left[:, None] * F
            out[base + 1: base + stop + 1] += right[:, None] * F
        return out

    @property
    def omega(self) -> np.ndarray:
        """All rows, shape (n_out, n_samples, d); built once on first use."""
        if self._omega is None:
            g = self.grid
            rows = [self.row(k, j) for k in range(g.n_blocks) for j in range(1, g.m + 1)]
            self._omega = np.stack(rows)
        return self._omega

    def apply_modal(self, v_modal) -> np.ndarray:
        """v_modal of shape (n_blocks, m+1, d) -> modal convolution (n_out, d)."""
        v = np.asarray(v_modal).reshape(-1, self.family.kappa.size)
        return np.einsum("nsd,sd->nd", self.omega, v)


def volterra_convolve(gen: Generator, C: float, order: FractionalOrder, grid: TimeGrid,
                      h, t_eval: float, weighted: bool = False) -> np.ndarray:
    """int_0^t (t-s)^(mu-1) P*(t-s) h(s) ds at the node t_eval.

    ``h`` is either an array of raw samples on ``grid.nodes`` (shape (N,) or
    (N, d)) or a PCTrajectory; with ``weighted=True`` an array is read as block
    samples of (s - t_b)^(1-lam) h(s) with shape (n_blocks, m+1, d).
    """
    family = ModalFamily(gen, C, order)
    d = gen.dim
    if isinstance(h, PCTrajectory):
        v, q = h.W, h.lam
    elif weighted:
        v, q = np.asarray(h, dtype=float).reshape(grid.blocks.shape + (d,)), order.lam
    else:
        raw = np.asarray(h, dtype=float).reshape(grid.nodes.size, d)
        # block sample (b, j) sits at distinct node b*m + j
        idx = np.arange(grid.n_blocks)[:, None] * grid.m + np.arange(grid.m + 1)[None, :]
        v, q = raw[idx], 1.0
    if t_eval <= 0.0:
        return np.zeros(d)
    k, j = grid.locate(t_eval, atol=1e-14 * max(1.0, grid.T))
    if j == 0:
        if k == 0:
            return np.zeros(d)
        k, j = k - 1, grid.m
    rule = ConvolutionRule(family, grid, q)
    modal = np.einsum("sd,sd->d", rule.row(k, j), family.to_modal(v.reshape(-1, d)))
    return family.from_modal(modal)


def gronwall_bound(a_samples, b: float, beta: float, t_eval: float, nodes,
                   max_terms: int = 400, ratio_tol: float = 1e-14) -> float:
    """a(t) + sum_{n>=1} (b Gamma(beta))^n I^{n beta} a(t) at the node t_eval.

    Each fractional integral uses the product-trapezoid rule on ``nodes``. The
    series stops once a term drops below ratio_tol times the running sum.
    """
    if b < 0:
        raise ValueError("b must be >= 0")
    if not beta > 0:
        raise ValueError("beta must be > 0")
    a_samples = np.asarray(a_samples, dtype=float)
    if np.any(a_samples < 0):
        raise ValueError("a must be nonnegative")
    nodes = np.asarray(nodes, dtype=float)
    idx = int(np.searchsorted(nodes, t_eval))
    total = float(a_samples[idx])
    if b == 0.0 or t_eval == 0.0:
        return total
    c = b * gamma(beta)
    for n in range(1, max_terms + 1):
        term = c**n * float(frac_integral(n * beta, nodes, a_samples, t_eval))
        total += term
        if abs(term) <= ratio_tol * abs(total):
            return total
    raise SeriesNonconvergence(f"Gronwall series not converged after {max_terms} terms at t={t_eval}")
