from __future__ import annotations

import numpy as np
import pytest

from hilfer_mono.monotone import MonotoneConfig, iterate_extremal
from hilfer_mono.operators import FractionalOrder
from hilfer_mono.problems import (
    Heat1DScenario,
    ScalarLinearScenario,
    build_heat1d,
    build_scalar,
    default_quasi_pair,
    laplacian_1d,
    scalar_oracle,
    scalar_oracle_weighted_limit,
    scalar_trajectory,
)
from hilfer_mono.specfun import gamma, mittag_leffler


def test_oracle_caputo_with_source():
    sc = ScalarLinearScenario(1.0, 1.0, 1.0, FractionalOrder(0.5, 1.0))
    expect = mittag_leffler(0.5, 1.0, -1.0) + mittag_leffler(0.5, 1.5, -1.0)
    assert scalar_oracle(sc, 1.0) == pytest.approx(expect, rel=1e-13)


def test_oracle_riemann_liouville_no_source():
    sc = ScalarLinearScenario(2.0, 0.0, 3.0, FractionalOrder(0.6, 0.0))
    t = 0.3
    assert scalar_oracle(sc, t) == pytest.approx(3.0 * t ** (-0.4) * mittag_leffler(0.6, 0.6, -2.0 * t**0.6))


def test_oracle_impulse_times():
    sc = ScalarLinearScenario(1.0, 0.0, 1.0, FractionalOrder(0.5, 0.5), impulses=((0.5, 0.5),))
    with pytest.raises(ValueError):
        scalar_oracle(sc, 0.5)
    left = scalar_oracle(sc, 0.5, left_limit=True)
    assert left == pytest.approx(0.5 ** (-0.25) * mittag_leffler(0.5, 0.75, -(0.5**0.5)))
    assert scalar_oracle_weighted_limit(sc, 1) == pytest.approx(0.5 / gamma(0.75))
    with pytest.raises(ValueError):
        scalar_oracle(sc, 0.0)


def test_weighted_limit_caputo_includes_left_value():
    sc = ScalarLinearScenario(1.0, 0.0, 1.0, FractionalOrder(0.5, 1.0), impulses=((0.5, 0.2),))
    assert scalar_oracle_weighted_limit(sc, 1) == pytest.approx(scalar_oracle(sc, 0.5, left_limit=True) + 0.2)


@pytest.mark.parametrize("imps", [((0.0, 1.0),), ((1.0, 1.0),), ((0.6, 1.0), (0.4, 1.0))])
def test_scenario_rejects_bad_impulses(imps):
    with pytest.raises(ValueError):
        ScalarLinearScenario(1.0, 0.0, 1.0, FractionalOrder(0.5, 0.5), impulses=imps)


def test_scalar_trajectory_records():
    sc = ScalarLinearScenario(1.0, 0.3, 1.0, FractionalOrder(0.5, 0.5), impulses=((0.4, 0.5),))
    p = build_scalar(sc)
    tr = scalar_trajectory(sc, p.grid(32))
    assert tr.W[0, 0, 0] == pytest.approx(1.0 / gamma(0.75))
    assert tr.W[1, 0, 0] == pytest.approx(0.5 / gamma(0.75))
    t = float(tr.grid.blocks[1, 10])
    assert tr.at(t)[0] == pytest.approx(scalar_oracle(sc, t), rel=1e-12)


def test_laplacian_small_case():
    A = laplacian_1d(3)
    expect = 16.0 * np.array([[2, -1, 0], [-1, 2, -1], [0, -1, 2]], dtype=float)
    assert np.allclose(A, expect)
    with pytest.raises(ValueError):
        laplacian_1d(2)
    with pytest.raises(ValueError):
        laplacian_1d(5, length=0.0)


@pytest.mark.parametrize("n", [3, 8, 16])
def test_laplacian_spectrum(n):
    A = laplacian_1d(n)
    h = 1.0 / (n + 1)
    assert np.allclose(A, A.T)
    ev = np.linalg.eigvalsh(A)
    j = np.arange(1, n + 1)
    assert np.allclose(ev, np.sort(2.0 / h**2 * (1 - np.cos(j * np.pi * h))))
    assert ev.min() > 0


def test_heat_scenario_validation():
    with pytest.raises(ValueError):
        Heat1DScenario(n_interior=2)
    with pytest.raises(ValueError):
        Heat1DScenario(x0_amp=-1.0)
    assert Heat1DScenario(n_interior=4).space == pytest.approx([0.2, 0.4, 0.6, 0.8])


def test_heat_solution_nonnegative():
    sc = Heat1DScenario(n_interior=5, f=1.0, alpha=-0.5, beta=0.1, impulses=((0.5, 0.3, 0.05),), x0_amp=1.0)
    p = build_heat1d(sc)
    cfg = MonotoneConfig(C=0.5, tol=1e-8)
    y0, z0, rep = default_quasi_pair(p, 5.0, cfg, m=32)
    assert rep["passed"]
    y, z, it = iterate_extremal(p, cfg, y0, z0)
    assert it.converged
    assert np.min(y.W) >= -1e-10
    # the saturating impulse adds a nonnegative jump
    assert np.all(y.jumps >= 0)


def test_default_pair_too_small_bound_fails():
    sc = Heat1DScenario(n_interior=5, f=5.0, alpha=-0.5, beta=0.0, x0_amp=2.0)
    p = build_heat1d(sc)
    _, _, rep = default_quasi_pair(p, 0.1, MonotoneConfig(C=0.5), m=16)
    assert not rep["passed"] and rep["min_d_up"] < 0
    with pytest.raises(ValueError):
        default_quasi_pair(p, 0.0)
