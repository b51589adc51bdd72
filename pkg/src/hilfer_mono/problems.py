"""Ready-made scenarios: scalar linear problems with exact solutions and a
1-D heat equation on a finite-difference grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .monotone import EvolutionProblem, MonotoneConfig, verify_quasi_pair
from .operators import FractionalOrder, Generator
from .quadrature import PCTrajectory, TimeGrid
from .specfun import mittag_leffler

__all__ = [
    "ScalarLinearScenario",
    "scalar_oracle",
    "scalar_oracle_weighted_limit",
    "build_scalar",
    "scalar_trajectory",
    "Heat1DScenario",
    "laplacian_1d",
    "build_heat1d",
    "default_quasi_pair",
]


@dataclass(frozen=True)
class ScalarLinearScenario:
    """dx = -a x + c with constant weighted jumps J_k at t_k."""

    a: float
    c: float
    x0: float
    order: FractionalOrder
    T: float = 1.0
    impulses: tuple = ()  # (t_k, J_k)

    def __post_init__(self):
        imp = tuple((float(t), float(J)) for t, J in self.impulses)
        times = [t for t, _ in imp]
        if any(not 0 < t < self.T for t in times) or any(b <= a for a, b in zip(times, times[1:])):
            raise ValueError("impulse times must be strictly increasing inside (0, T)")
        object.__setattr__(self, "impulses", imp)


def scalar_oracle(sc: ScalarLinearScenario, t: float, left_limit: bool = False) -> float:
    """Exact solution at t; at an impulse time only the left limit is defined
    and must be asked for with ``left_limit=True``."""
    mu, lam = sc.order.mu, sc.order.lam
    if not 0 < t <= sc.T:
        raise ValueError("t must lie in (0, T]")
    if not left_limit and any(t == tk for tk, _ in sc.impulses):
        raise ValueError("t coincides with an impulse time; use the one-sided limits")
    x = t ** (lam - 1.0) * mittag_leffler(mu, lam, -sc.a * t**mu) * sc.x0
    for tk, J in sc.impulses:
        if tk < t:
            s = t - tk
            x += s ** (lam - 1.0) * mittag_leffler(mu, lam, -sc.a * s**mu) * J
    if sc.c != 0.0:
        x += sc.c * t**mu * mittag_leffler(mu, mu + 1.0, -sc.a * t**mu)
    return float(x)


def scalar_oracle_weighted_limit(sc: ScalarLinearScenario, k: int) -> float:
    """lim (t - t_k)^(1-lam) x(t) as t -> t_k+; k = 0 is the initial point."""
    mu, lam = sc.order.mu, sc.order.lam
    datum = sc.x0 if k == 0 else sc.impulses[k - 1][1]
    # E_{mu,lam}(0) = 1/Gamma(lam)
    jump = datum * float(mittag_leffler(mu, lam, 0.0))
    if lam < 1.0 or k == 0:
        return jump
    return _left_limit(sc, k) + jump


def _left_limit(sc, k):
    return scalar_oracle(sc, sc.impulses[k - 1][0], left_limit=True)


def build_scalar(sc: ScalarLinearScenario) -> EvolutionProblem:
    c = float(sc.c)
    imps = [(tk, (lambda J: (lambda y, z: np.array([J])))(J)) for tk, J in sc.impulses]
    return EvolutionProblem(
        gen=Generator.scalar(sc.a),
        order=sc.order,
        T=sc.T,
        x0=np.array([sc.x0]),
        g=lambda t, y, z: np.array([c]),
        impulses=imps,
        name="scalar",
    )


def scalar_trajectory(sc: ScalarLinearScenario, grid: TimeGrid) -> PCTrajectory:
    """The exact solution sampled on ``grid`` with exact right-limit records."""
    recs = [scalar_oracle_weighted_limit(sc, k) for k in range(grid.n_blocks)]
    traj = PCTrajectory.from_function(grid, sc.order.lam, lambda t: scalar_oracle(sc, t, left_limit=True), recs)
    return traj


def laplacian_1d(n_interior: int, length: float = 1.0) -> np.ndarray:
    """(1/h^2) tridiag(-1, 2, -1) with Dirichlet ends, h = length/(n+1)."""
    if n_interior < 3:
        raise ValueError("n_interior must be >= 3")
    if not length > 0:
        raise ValueError("length must be > 0")
    h = length / (n_interior + 1)
    A = 2.0 * np.eye(n_interior) - np.eye(n_interior, k=1) - np.eye(n_interior, k=-1)
    return A / h**2


@dataclass(frozen=True)
class Heat1DScenario:
    """Heat equation with g(t, y, z) = f(w) + alpha y - beta z and impulses
    phi_k(y, z) = kappa_k y/(1 + y) + const_k, all componentwise."""

    n_interior: int = 16
    length: float = 1.0
    order: FractionalOrder = field(default_factory=lambda: FractionalOrder(0.5, 0.5))
    T: float = 1.0
    f: float = 1.0  # amplitude of the source sin(pi w / length)
    alpha: float = -0.5
    beta: float = 0.2
    impulses: tuple = ()  # (t_k, kappa_k, const_k)
    x0_amp: float = 0.0  # x0(w) = x0_amp sin(pi w / length)

    def __post_init__(self):
        if self.n_interior < 3:
            raise ValueError("n_interior must be >= 3")
        if self.x0_amp < 0 or self.f < 0:
            raise ValueError("heat scenarios need x0 >= 0 and f >= 0")
        object.__setattr__(self, "impulses", tuple(tuple(float(v) for v in imp) for imp in self.impulses))

    @property
    def space(self) -> np.ndarray:
        h = self.length / (self.n_interior + 1)
        return h * np.arange(1, self.n_interior + 1)


def build_heat1d(sc: Heat1DScenario) -> EvolutionProblem:
    A = laplacian_1d(sc.n_interior, sc.length)
    profile = np.sin(np.pi * sc.space / sc.length)
    src = sc.f * profile
    x0 = sc.x0_amp * profile
    al, be = sc.alpha, sc.beta

    def g(t, y, z):
        return src + al * y - be * z

    def saturating(kappa, const):
        def phi(y, z):
            yp = np.maximum(y, 0.0)
            return kappa * yp / (1.0 + yp) + const
        return phi

    imps = [(tk, saturating(kap, cst)) for tk, kap, cst in sc.impulses]
    return EvolutionProblem(Generator(A, symmetric_flag=True), sc.order, sc.T, x0, g, imps, name="heat1d")


def default_quasi_pair(problem: EvolutionProblem, bound_scale: float, cfg: MonotoneConfig | None = None,
                       m: int | None = None, grid: TimeGrid | None = None):
    """y0 = 0 and z0 = bound_scale (t - t_k)^(lam-1) in every block, then verified.

    Returns (y0, z0, report); a failed verification is reported, not raised.
    """
    if not bound_scale > 0:
        raise ValueError("bound_scale must be > 0")
    cfg = cfg or MonotoneConfig()
    if grid is None:
        grid = problem.grid(m) if m else problem.grid()
    lam = problem.order.lam
    y0 = problem.zero(grid)
    z0 = PCTrajectory.constant_weighted(grid, lam, np.full(problem.dim, float(bound_scale)))
    return y0, z0, verify_quasi_pair(problem, cfg, y0, z0)
