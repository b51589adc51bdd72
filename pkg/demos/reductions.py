"""Scalar test equation x' = -x in the Hilfer sense for a few (mu, nu).

Prints the weighted error against the Mittag-Leffler solution on a sequence
of grids. Run: python demos/reductions.py
"""

from __future__ import annotations

import numpy as np

from hilfer_mono import FractionalOrder, MonotoneConfig, iterate_extremal
from hilfer_mono.problems import ScalarLinearScenario, build_scalar, scalar_trajectory

CASES = [(0.6, 1.0), (0.6, 0.0), (0.5, 0.5), (0.3, 0.7)]


def weighted_error(mu, nu, m):
    sc = ScalarLinearScenario(1.0, 0.0, 1.0, FractionalOrder(mu, nu))
    p = build_scalar(sc)
    x = p.zero(p.grid(m))
    y, _, _ = iterate_extremal(p, MonotoneConfig(tol=1e-12), x, x)
    return np.max(np.abs(y.W[:, 1:] - scalar_trajectory(sc, y.grid).W[:, 1:]))


if __name__ == "__main__":
    grids = (64, 128, 256, 512)
    print("  mu    nu   lam  " + "".join(f"{m:>11d}" for m in grids))
    for mu, nu in CASES:
        lam = mu + nu - mu * nu
        errs = [weighted_error(mu, nu, m) for m in grids]
        print(f"{mu:5.2f} {nu:5.2f} {lam:5.2f}  " + "".join(f"{e:11.2e}" for e in errs))
