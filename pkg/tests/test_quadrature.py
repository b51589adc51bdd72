from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hilfer_mono.operators import FractionalOrder, Generator
from hilfer_mono.quadrature import (
    PCTrajectory,
    TimeGrid,
    frac_integral,
    gronwall_bound,
    volterra_convolve,
    weighted_norm,
)
from hilfer_mono.specfun import SeriesNonconvergence, gamma, mittag_leffler


def power_rule(alpha, beta, t):
    # I^alpha s^beta = Gamma(beta+1)/Gamma(beta+alpha+1) t^(beta+alpha)
    return math.gamma(beta + 1) / math.gamma(beta + alpha + 1) * t ** (beta + alpha)


def test_grid_structure():
    g = TimeGrid.build(2.0, (0.5, 1.2), m=8, lam=0.75)
    assert g.n_blocks == 3
    assert g.q == pytest.approx(2.0)
    nodes = g.nodes
    assert nodes[0] == 0.0 and nodes[-1] == 2.0
    assert np.all(np.diff(nodes) > 0)
    for k, idx in enumerate(g.impulse_indices, start=1):
        assert nodes[idx] == g.impulse_times[k - 1]
    # graded toward the left end of each block
    h = np.diff(g.blocks[1])
    assert np.all(np.diff(h) > 0)


def test_grid_grading_follows_lambda():
    assert TimeGrid.build(1.0, (), 8, lam=0.25).q == pytest.approx(4.0)
    with pytest.raises(ValueError):
        TimeGrid.build(1.0, (0.5, 0.4), 8)
    with pytest.raises(ValueError):
        TimeGrid.build(1.0, (1.0,), 8)


def test_frac_integral_trivial_cases():
    nodes = TimeGrid.build(1.0, (), 64).nodes
    assert frac_integral(0.4, nodes, np.zeros(nodes.size), 1.0) == 0.0
    assert frac_integral(1.0, nodes, np.ones(nodes.size), nodes[40]) == pytest.approx(nodes[40], rel=1e-14)
    with pytest.raises(ValueError):
        frac_integral(0.0, nodes, np.ones(nodes.size), 1.0)
    with pytest.raises(ValueError):
        frac_integral(0.5, nodes, np.ones(nodes.size), 0.123456)


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.9, 1.0, 1.7])
@pytest.mark.parametrize("beta", [0.5, 1.0, 2.5])
def test_frac_integral_power_rule(alpha, beta):
    nodes = TimeGrid.build(1.0, (), 1024).nodes
    got = frac_integral(alpha, nodes, nodes**beta, 1.0)
    # piecewise-linear data: O(h^2) with h ~ 2/1024 near t = 1
    assert got == pytest.approx(power_rule(alpha, beta, 1.0), rel=1e-5)


def test_frac_integral_state_valued():
    nodes = TimeGrid.build(1.0, (), 256).nodes
    f = np.stack([nodes, 2 * nodes], axis=1)
    got = frac_integral(0.5, nodes, f, 1.0)
    assert got.shape == (2,)
    assert got[1] == pytest.approx(2 * got[0])


@pytest.mark.parametrize("a, b", [(0.3, 0.4), (0.5, 0.5), (0.2, 0.7)])
def test_frac_integral_semigroup_law(a, b):
    nodes = TimeGrid.build(1.0, (), 1024).nodes
    f = nodes**1.5
    inner = np.array([frac_integral(b, nodes, f, t) for t in nodes])
    assert frac_integral(a, nodes, inner, 1.0) == pytest.approx(frac_integral(a + b, nodes, f, 1.0), abs=1e-6)


def test_volterra_zero_forcing():
    g = TimeGrid.build(1.0, (), 32, lam=0.75)
    out = volterra_convolve(Generator.scalar(1.0), 0.0, FractionalOrder(0.5, 0.5), g, np.zeros(g.nodes.size), 1.0)
    assert np.all(out == 0.0)
    assert np.all(volterra_convolve(Generator.scalar(1.0), 0.0, FractionalOrder(0.5, 0.5), g,
                                    np.ones(g.nodes.size), 0.0) == 0.0)


@pytest.mark.parametrize("mu", [0.4, 0.7])
def test_volterra_zero_generator_constant(mu):
    g = TimeGrid.build(1.0, (), 128)
    c = 1.3
    out = volterra_convolve(Generator(np.zeros((1, 1))), 0.0, FractionalOrder(mu, 1.0), g, np.full(g.nodes.size, c), g.nodes[100])
    t = g.nodes[100]
    assert out[0] == pytest.approx(c * t**mu / gamma(mu + 1), rel=1e-9)


def test_volterra_scalar_constant_and_refinement():
    order = FractionalOrder(0.5, 0.5)
    exact = 0.7 * mittag_leffler(0.5, 1.5, -2.0)
    errs = []
    for m in (64, 128, 256, 512):
        g = TimeGrid.build(1.0, (), m, lam=order.lam)
        v = volterra_convolve(Generator.scalar(2.0), 0.0, order, g, np.full(g.nodes.size, 0.7), 1.0)[0]
        errs.append(abs(v - exact))
    assert errs[-1] < 3e-4
    assert all(a / b >= 1.5 for a, b in zip(errs, errs[1:]))


def make_traj(rng, grid, lam, d=2):
    return PCTrajectory(grid, lam, rng.normal(size=grid.blocks.shape + (d,)))


def test_weighted_norm_basic():
    g = TimeGrid.build(1.0, (), 64, lam=0.75)
    zero = PCTrajectory(g, 0.75, np.zeros(g.blocks.shape + (1,)))
    assert weighted_norm(zero) == 0.0
    lam = 0.75
    x = PCTrajectory.from_function(g, lam, lambda t: t ** (lam - 1), right_limits=[[1.0]])
    assert weighted_norm(x) == pytest.approx(1.0, rel=1e-12)


def test_weighted_norm_lambda_one_is_sup_norm():
    g = TimeGrid.build(1.0, (0.5,), 32, lam=1.0)
    x = PCTrajectory.from_function(g, 1.0, lambda t: np.array([math.sin(5 * t), -2 * t]))
    assert weighted_norm(x) == pytest.approx(np.max(np.abs(x.raw())))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(-5, 5))
def test_weighted_norm_is_a_norm(seed, s):
    rng = np.random.default_rng(seed)
    g = TimeGrid.build(1.0, (0.3,), 16, lam=0.6)
    x, y = make_traj(rng, g, 0.6), make_traj(rng, g, 0.6)
    assert weighted_norm(s * x) == pytest.approx(abs(s) * weighted_norm(x), rel=1e-15, abs=1e-300)
    assert weighted_norm(x + y) <= weighted_norm(x) + weighted_norm(y) + 1e-15


def test_trajectory_rejects_mismatch_and_nan():
    g1 = TimeGrid.build(1.0, (), 8)
    g2 = TimeGrid.build(1.0, (), 16)
    a = PCTrajectory(g1, 1.0, np.zeros((1, 9, 1)))
    b = PCTrajectory(g2, 1.0, np.zeros((1, 17, 1)))
    with pytest.raises(ValueError):
        a - b
    with pytest.raises(FloatingPointError):
        PCTrajectory(g1, 1.0, np.full((1, 9, 1), np.nan))


def test_gronwall_trivial_cases():
    nodes = TimeGrid.build(1.0, (), 128).nodes
    a = 1.0 + nodes
    assert gronwall_bound(a, 0.0, 0.5, 1.0, nodes) == pytest.approx(2.0)
    assert gronwall_bound(np.zeros(nodes.size), 0.7, 0.5, 1.0, nodes) == 0.0


@pytest.mark.parametrize("b, beta", [(0.5, 0.5), (1.0, 0.3), (2.0, 0.8)])
def test_gronwall_constant_closed_form(b, beta):
    nodes = TimeGrid.build(1.0, (), 256).nodes
    t = nodes[200]
    got = gronwall_bound(np.full(nodes.size, 2.0), b, beta, t, nodes)
    assert got == pytest.approx(2.0 * mittag_leffler(beta, 1.0, b * gamma(beta) * t**beta), rel=1e-10)


def test_gronwall_monotone_in_b_and_t():
    nodes = TimeGrid.build(1.0, (), 128).nodes
    a = 1.0 + np.sin(3 * nodes) ** 2
    vals_b = [gronwall_bound(a, b, 0.5, 1.0, nodes) for b in (0.0, 0.2, 0.5, 1.0)]
    assert all(x <= y for x, y in zip(vals_b, vals_b[1:]))
    vals_t = [gronwall_bound(a, 0.5, 0.5, t, nodes) for t in nodes[::16]]
    assert all(x <= y + 1e-14 for x, y in zip(vals_t, vals_t[1:]))


def test_gronwall_nonconvergence_and_validation():
    nodes = TimeGrid.build(1.0, (), 32).nodes
    with pytest.raises(SeriesNonconvergence):
        gronwall_bound(np.ones(nodes.size), 50.0, 0.5, 1.0, nodes, max_terms=3)
    with pytest.raises(ValueError):
        gronwall_bound(-np.ones(nodes.size), 0.5, 0.5, 1.0, nodes)
