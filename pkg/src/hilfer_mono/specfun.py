"""Scalar special functions: gamma, Mittag-Leffler, the Wright-type series and
the Mainardi (M-Wright) density used by the subordination integrals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate, special

__all__ = [
    "SeriesControl",
    "SeriesNonconvergence",
    "PoleError",
    "gamma",
    "mittag_leffler",
    "wright_omega",
    "mainardi_density",
    "density_nodes",
    "density_rule",
    "DEFAULT_CONTROL",
]


class SeriesNonconvergence(ArithmeticError):
    """A series did not reach its truncation threshold within ``max_terms``."""


class PoleError(ValueError):
    """Gamma evaluated at a nonpositive integer."""


@dataclass(frozen=True)
class SeriesControl:
    max_terms: int = 400
    abs_tol: float = 1e-15

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be >= 1")
        if not self.abs_tol >= 0:
            raise ValueError("abs_tol must be >= 0")


DEFAULT_CONTROL = SeriesControl()

# |z| above which the Mittag-Leffler power series is abandoned
_ML_ASYMPTOTIC_RADIUS = 15.0
_EPS = np.finfo(float).eps


def gamma(x):
    """Gamma function; raises :class:`PoleError` at 0, -1, -2, ..."""
    xa = np.asarray(x, dtype=float)
    if np.any((xa <= 0) & (xa == np.round(xa))):
        raise PoleError(f"gamma has a pole at {x!r}")
    out = special.gamma(xa)
    return float(out) if out.ndim == 0 else out


def _rgamma(x):
    # 1/Gamma, zero at the poles
    return special.rgamma(x)


# ---------------------------------------------------------------------------
# Mittag-Leffler


def _ml_series(a, b, z, ctl):
    """Power series; returns (value, estimated roundoff error)."""
    if z == 0.0:
        return float(_rgamma(b)), 0.0
    total = 0.0
    abs_sum = 0.0
    log_abs_z = math.log(abs(z))
    sign_z = 1.0 if z > 0 else -1.0
    small_run = 0
    for n in range(ctl.max_terms):
        arg = a * n + b
        rg = _rgamma(arg)
        if rg == 0.0:
            continue
        # |z|^n / |Gamma(an+b)| in log space keeps the large-n terms finite
        log_mag = n * log_abs_z - special.gammaln(arg)
        term = math.copysign(math.exp(log_mag), rg) * (sign_z**n)
        total += term
        abs_sum += abs(term)
        if abs(term) <= ctl.abs_tol and n * a > math.log(abs(z) + 1.0):
            small_run += 1
            if small_run >= 2:
                return total, 4 * _EPS * abs_sum
        else:
            small_run = 0
    raise SeriesNonconvergence(
        f"Mittag-Leffler series for a={a}, b={b}, z={z} did not converge in "
        f"{ctl.max_terms} terms"
    )


def _ml_negative_integral(a, b, x):
    """E_{a,b}(-x) for 0 < a < 1, x > 0 via the real integral representation.

    Valid for b < 1 + a; larger b is reduced with
    E_{a,b}(z) = (E_{a,b-a}(z) - 1/Gamma(b-a)) / z.
    """
    if b >= 1.0 + a:
        inner = _ml_negative_integral(a, b - a, x)
        return (inner - float(_rgamma(b - a))) / (-x)
    s1 = math.sin(math.pi * (1.0 - b))
    s2 = math.sin(math.pi * (1.0 - b + a))
    c = math.cos(math.pi * a)

    inv_a = 1.0 / a

    # r^((1-b)/a) goes into quad's algebraic weight; the rest is smooth on [0, r_max]
    def smooth(r):
        return math.exp(-(r**inv_a)) * (r * s1 + x * s2) / (r * r + 2.0 * r * x * c + x * x)

    r_max = 40.0**a
    val, _ = integrate.quad(smooth, 0.0, r_max, weight="alg", wvar=((1.0 - b) / a, 0.0),
                            limit=200, epsabs=1e-17, epsrel=1e-12)
    return val / (math.pi * a)


def _ml_asymptotic(a, b, z, ctl):
    """Large-|z| expansion for real z and 0 < a < 2."""
    total = 0.0
    if z > 0:
        total += z ** ((1.0 - b) / a) * math.exp(z ** (1.0 / a)) / a
    elif a > 1.0:
        # two complex-conjugate exponential contributions
        w = complex(z) ** (1.0 / a)
        for branch in (w, w.conjugate()):
            total += (branch ** (1.0 - b) * np.exp(branch) / a).real
    prev = math.inf
    for k in range(1, ctl.max_terms):
        term = -(z ** (-k)) * float(_rgamma(b - a * k))
        if abs(term) > prev and k > 2:
            break
        total += term
        if abs(term) <= ctl.abs_tol * max(1.0, abs(total)):
            break
        if term != 0.0:
            prev = abs(term)
    return total


def _mittag_leffler_scalar(a, b, z, ctl):
    if a == 1.0 and b == 1.0:
        return math.exp(z)
    if z == 0.0:
        return float(_rgamma(b))
    # guard: series terms peak near |z|^(n) / Gamma(an+b) ~ exp(|z|^(1/a))
    safe_series = abs(z) ** (1.0 / a) < 25.0 or z > 0
    if abs(z) <= _ML_ASYMPTOTIC_RADIUS or (z > 0 and abs(z) ** (1.0 / a) < 600):
        if safe_series:
            try:
                val, err = _ml_series(a, b, z, ctl)
            except SeriesNonconvergence:
                if z < 0 and a < 1.0:
                    return _ml_negative_integral(a, b, -z)
                raise
            if err <= 1e-12 * max(1.0, abs(val)):
                return val
        if z < 0 and a < 1.0:
            return _ml_negative_integral(a, b, -z)
        if abs(z) <= _ML_ASYMPTOTIC_RADIUS:
            raise SeriesNonconvergence(
                f"Mittag-Leffler E_{{{a},{b}}}({z}): series loses all digits "
                "to cancellation and no alternative representation applies"
            )
    if z < 0 and a < 1.0:
        return _ml_negative_integral(a, b, -z)
    return _ml_asymptotic(a, b, z, ctl)


def mittag_leffler(a, b, z, ctl: SeriesControl | None = None):
    """Two-parameter Mittag-Leffler function E_{a,b}(z) for real z.

    Evaluated by the power series while it is numerically safe, by the real
    integral representation for negative arguments with ``0 < a < 1``, and by
    the asymptotic expansion for ``|z| > 15`` otherwise.

    Accepts scalar or array ``z``.
    """
    ctl = ctl or DEFAULT_CONTROL
    if not 0.0 < a <= 2.0:
        raise ValueError(f"Mittag-Leffler order a={a} outside (0, 2]")
    if not b > 0.0:
        raise ValueError(f"Mittag-Leffler parameter b={b} must be positive")
    a = float(a)
    b = float(b)
    za = np.asarray(z, dtype=float)
    if za.ndim == 0:
        return _mittag_leffler_scalar(a, b, float(za), ctl)
    out = np.empty_like(za)
    for idx, zz in np.ndenumerate(za):
        out[idx] = _mittag_leffler_scalar(a, b, float(zz), ctl)
    return out


# ---------------------------------------------------------------------------
# Wright-type series and the Mainardi density


def wright_omega(mu, x, ctl: SeriesControl | None = None):
    """The one-sided stable density series

        varpi_mu(x) = 1/pi * sum_{n>=1} (-1)^(n-1) x^(-n mu - 1)
                      Gamma(n mu + 1) / n! * sin(n pi mu),   x > 0.

    Convergent for every x > 0 when 0 < mu < 1; accurate only where the
    alternating terms do not cancel catastrophically (large x).
    """
    ctl = ctl or DEFAULT_CONTROL
    x = float(x)
    if x <= 0:
        raise ValueError("wright_omega needs x > 0")
    total = 0.0
    log_x = math.log(x)
    for n in range(1, ctl.max_terms + 1):
        log_mag = (-n * mu - 1.0) * log_x + special.gammaln(n * mu + 1.0) \
            - special.gammaln(n + 1.0)
        envelope = math.exp(log_mag)
        total += (-1.0) ** (n - 1) * envelope * math.sin(n * math.pi * mu)
        if envelope < ctl.abs_tol and n > 1:
            return total / math.pi
    raise SeriesNonconvergence(
        f"wright_omega(mu={mu}, x={x}) needs more than {ctl.max_terms} terms"
    )


def _mainardi_series(mu, theta, ctl):
    """xi_mu(theta) from the varpi series after substituting x = theta^(-1/mu).

    The substitution collapses x^(-n mu - 1) against theta^(-1-1/mu) to
    theta^(n-1); returns (value, roundoff estimate, terms used).
    """
    total = 0.0
    abs_sum = 0.0
    log_t = math.log(theta)
    small_run = 0
    for n in range(1, ctl.max_terms + 1):
        log_mag = (n - 1) * log_t + special.gammaln(n * mu + 1.0) \
            - special.gammaln(n + 1.0)
        # sin(n pi mu) vanishes for some n at rational mu, so the stopping test
        # uses the magnitude envelope rather than the term itself
        envelope = math.exp(log_mag) / (math.pi * mu)
        term = (-1.0) ** (n - 1) * envelope * math.sin(n * math.pi * mu)
        total += term
        abs_sum += abs(term)
        if envelope < ctl.abs_tol and (n - 1) > theta:
            small_run += 1
            if small_run >= 2:
                return total, 4 * _EPS * abs_sum, n
        else:
            small_run = 0
    raise SeriesNonconvergence(
        f"Mainardi series for mu={mu} at theta={theta} did not converge in "
        f"{ctl.max_terms} terms"
    )


def _mainardi_integral(mu, theta):
    """Nonnegative-integrand representation of xi_mu (Zolotarev form)."""
    r = 1.0 / (1.0 - mu)
    scale = theta ** r

    def u(phi):
        return (math.sin(mu * phi) / math.sin(phi)) ** r \
            * math.sin((1.0 - mu) * phi) / math.sin(mu * phi)

    def integrand(phi):
        uu = u(phi)
        e = scale * uu
        return uu * math.exp(-e) if e < 745.0 else 0.0

    eps = 1e-12
    val, _ = integrate.quad(integrand, eps, math.pi - eps, limit=400,
                            epsabs=0.0, epsrel=1e-13)
    return r / math.pi * theta ** (mu * r) * val


def _mainardi_scalar(mu, theta, ctl):
    if theta <= 0:
        raise ValueError("mainardi_density needs theta > 0")
    try:
        val, err, _ = _mainardi_series(mu, theta, ctl)
    except (SeriesNonconvergence, OverflowError):
        # large theta: terms overflow long before the alternating sum settles
        val, err = math.nan, math.inf
    if err <= 1e-14:
        return max(val, 0.0)
    val = _mainardi_integral(mu, theta)
    if not math.isfinite(val):
        raise SeriesNonconvergence(
            f"Mainardi density mu={mu} theta={theta}: no stable representation"
        )
    return val


def mainardi_density(mu, theta, ctl: SeriesControl | None = None):
    """The probability density xi_mu(theta) = (1/mu) theta^(-1-1/mu)
    varpi_mu(theta^(-1/mu)) on (0, inf).

    The series is used where its roundoff estimate stays below 1e-14; past
    that point (large theta, where cancellation destroys it) the density is
    taken from its nonnegative Zolotarev integral instead.
    """
    ctl = ctl or DEFAULT_CONTROL
    if not 0.0 < mu < 1.0:
        raise ValueError(f"mu={mu} outside (0, 1)")
    th = np.asarray(theta, dtype=float)
    if th.ndim == 0:
        return _mainardi_scalar(mu, float(th), ctl)
    out = np.empty_like(th)
    for idx, tt in np.ndenumerate(th):
        out[idx] = _mainardi_scalar(mu, float(tt), ctl)
    return out


def _theta_max(mu):
    """Smallest theta on a doubling ladder with xi(theta) * theta < 1e-14."""
    theta = 1.0
    while mainardi_density(mu, theta) * theta >= 1e-14:
        theta *= 1.25
        if theta > 1e4:
            raise SeriesNonconvergence(f"density tail for mu={mu} not resolved")
    return theta


@lru_cache(maxsize=64)
def _density_rule(mu: float, n: int):
    theta_max = _theta_max(mu)
    order = 8
    n_panels = max(1, n // order)
    # uniform panels over the bulk, panels shrinking by 3x toward 0
    n_geo = (3 * n_panels) // 5
    n_uni = n_panels - n_geo
    split = theta_max / 4.0 if n_geo else 0.0
    edges = list(np.linspace(split, theta_max, n_uni + 1))
    if n_geo:
        geo = [split * 3.0 ** (-j) for j in range(1, n_geo)]
        edges = [0.0] + sorted(geo) + edges
    edges = np.asarray(edges)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = (0.5 * (hi - lo) * x + 0.5 * (hi + lo)).ravel()
    weights = (0.5 * (hi - lo) * w).ravel()
    # leftover nodes go into a higher-order rule on the last bulk panel
    extra = n - nodes.size
    if extra > 0:
        a, b = edges[-2], edges[-1]
        xf, wf = np.polynomial.legendre.leggauss(order + extra)
        nodes = np.concatenate([nodes[:-order], 0.5 * (b - a) * xf + 0.5 * (b + a)])
        weights = np.concatenate([weights[:-order], 0.5 * (b - a) * wf])
    xi = mainardi_density(mu, nodes)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    xi.setflags(write=False)
    return nodes, weights, xi


DEFAULT_DENSITY_NODES = 160


def density_nodes(mu, n: int = DEFAULT_DENSITY_NODES):
    """Deterministic quadrature rule ``(theta, weight)`` on (0, theta_max) for
    integrals against the Mainardi density.

    Composite 8-point Gauss-Legendre: uniform panels over the bulk of the
    density and geometrically shrinking panels toward 0, where the
    subordinated exponentials exp(-k theta) concentrate for large k.
    """
    if n < 8:
        raise ValueError("density_nodes needs n >= 8")
    nodes, weights, _ = _density_rule(float(mu), int(n))
    return nodes, weights


def density_rule(mu, n: int = DEFAULT_DENSITY_NODES):
    """Nodes, weights and the density values at the nodes (cached)."""
    if n < 8:
        raise ValueError("density_nodes needs n >= 8")
    return _density_rule(float(mu), int(n))
