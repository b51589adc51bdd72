"""Gronwall-type bound for x = 1 + b int_0^t (t-s)^(beta-1) x(s) ds.

The bound series and the resolvent solution E_beta(b Gamma(beta) t^beta)
coincide; the table shows both next to a direct Picard solve.
"""

from __future__ import annotations

import numpy as np

from hilfer_mono.quadrature import frac_integral, gronwall_bound
from hilfer_mono.specfun import gamma, mittag_leffler

b, beta, N = 0.5, 0.5, 256
nodes = np.linspace(0.0, 1.0, N + 1) ** 2
K = np.vstack([np.zeros(N + 1)] + [frac_integral(beta, nodes, np.eye(N + 1), t) for t in nodes[1:]])
x = np.ones(N + 1)
for _ in range(200):
    x = 1.0 + b * gamma(beta) * (K @ x)

ones = np.ones(N + 1)
print("     t       picard        bound       E_beta")
for i in (16, 64, 128, 192, 256):
    t = nodes[i]
    print(f"{t:7.4f}  {x[i]:.9f}  {gronwall_bound(ones, b, beta, t, nodes):.9f}  "
          f"{mittag_leffler(beta, 1.0, b * gamma(beta) * t**beta):.9f}")
