"""Exact kernel moments for weakly singular product integration.

Everything here integrates the two-sided power kernel

    k(s) = (t - s)^(p-1) (s - c)^(q-1),    c <= s <= t,

against hat functions built in the variable u = (s - c)^r, so that
``r = 1`` gives piecewise-linear interpolation in s and ``r = mu`` gives
piecewise-linear interpolation in s^mu.
"""

from __future__ import annotations

import numpy as np
from scipy import special


def _betainc_diff(x_lo, x_hi, a, b):
    """I_{x_hi}(a, b) - I_{x_lo}(a, b) without cancellation near x = 1."""
    x_lo, x_hi = np.broadcast_arrays(np.asarray(x_lo, dtype=float), np.asarray(x_hi, dtype=float))
    out = np.empty(x_lo.shape)
    upper = 0.5 * (x_lo + x_hi) > 0.5
    lo = ~upper
    out[lo] = special.betainc(a, b, x_hi[lo]) - special.betainc(a, b, x_lo[lo])
    # I_x(a, b) = 1 - I_{1-x}(b, a)
    out[upper] = special.betainc(b, a, 1.0 - x_lo[upper]) - special.betainc(b, a, 1.0 - x_hi[upper])
    return out


def power_moment(t, c, a, b, p, q):
    """int_a^b (t - s)^(p-1) (s - c)^(q-1) ds for c <= a <= b <= t."""
    span = t - c
    va = np.clip((np.asarray(a, dtype=float) - c) / span, 0.0, 1.0)
    vb = np.clip((np.asarray(b, dtype=float) - c) / span, 0.0, 1.0)
    scale = span ** (p + q - 1.0) * special.beta(q, p)
    return scale * _betainc_diff(va, vb, q, p)


def interval_hat_moments(t, c, nodes, p, q, r=1.0):
    """Per-interval hat contributions for the kernel (t-s)^(p-1) (s-c)^(q-1).

    ``nodes`` is increasing with ``nodes[0] >= c`` and ``nodes[-1] <= t``.
    Returns ``(left, right)`` of length ``len(nodes) - 1``: interval i adds
    ``left[i] * f(nodes[i]) + right[i] * f(nodes[i+1])`` when f is linear in
    u = (s - c)^r on that interval.
    """
    nodes = np.asarray(nodes, dtype=float)
    a, b = nodes[:-1], nodes[1:]
    m0 = power_moment(t, c, a, b, p, q)
    m1 = power_moment(t, c, a, b, p, q + r)
    ua = (a - c) ** r
    ub = (b - c) ** r
    du = ub - ua
    left = (ub * m0 - m1) / du
    right = (m1 - ua * m0) / du
    # roundoff can leave -1e-18 on hats that are nonnegative by construction
    return np.maximum(left, 0.0), np.maximum(right, 0.0)


def hat_weights(t, c, nodes, p, q, r=1.0):
    """Nodal weights w with int_c^t k(s) f(s) ds ~= sum_j w_j f(nodes_j)."""
    left, right = interval_hat_moments(t, c, nodes, p, q, r)
    w = np.zeros(len(nodes))
    w[:-1] += left
    w[1:] += right
    return w


def kernel_midpoints(t, nodes, mu):
    """Lag t - s at which a kernel depending on (t - s)^mu is frozen on each
    interval: the midpoint of the interval in the variable (t - s)^mu."""
    nodes = np.asarray(nodes, dtype=float)
    lag_hi = np.maximum(t - nodes[:-1], 0.0)
    lag_lo = np.maximum(t - nodes[1:], 0.0)
    return (0.5 * (lag_hi**mu + lag_lo**mu)) ** (1.0 / mu)
