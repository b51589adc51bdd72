"""Coupled extremal mild solutions of impulsive Hilfer-type evolution equations
by mixed monotone iteration."""

from __future__ import annotations

from .monotone import (
    EvolutionProblem,
    IterationReport,
    MonotoneConfig,
    OrderingError,
    apply_G,
    check_hypotheses,
    iterate_extremal,
    order_leq,
    residual_fixed_point,
    verify_quasi_pair,
)
from .operators import (
    FractionalOrder,
    Generator,
    OperatorBounds,
    k_mu_apply,
    p_mu_apply,
    perturbed_semigroup_apply,
    s_munu_apply,
    semigroup_apply,
    verify_operator_bounds,
)
from .problems import (
    Heat1DScenario,
    ScalarLinearScenario,
    build_heat1d,
    build_scalar,
    default_quasi_pair,
    scalar_oracle,
)
from .quadrature import PCTrajectory, TimeGrid, frac_integral, gronwall_bound, volterra_convolve, weighted_norm
from .specfun import SeriesControl, density_nodes, gamma, mainardi_density, mittag_leffler

__version__ = "0.1.0"
