"""Finite-dimensional solution operators.

``Q(t) = exp(-tA)`` and its shifted form ``R(t) = exp(-Ct) Q(t)``, plus the
subordinated families

    P*(t) = int_0^inf mu theta xi_mu(theta) R(t^mu theta) dtheta
    K*(t) = t^(mu-1) P*(t)
    S*(t) = I^{nu(1-mu)} K*(t)

With ``C = 0`` these are the unshifted P, K, S.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from . import _weights
from .specfun import density_rule, gamma

__all__ = [
    "Generator",
    "FractionalOrder",
    "OperatorBounds",
    "ModalFamily",
    "semigroup_apply",
    "perturbed_semigroup_apply",
    "semigroup_matrices",
    "p_mu_apply",
    "k_mu_apply",
    "s_munu_apply",
    "estimate_bounds",
    "verify_operator_bounds",
    "graded_nodes",
]

DEFAULT_SUBGRID = 512


@dataclass(frozen=True)
class FractionalOrder:
    """Order mu in (0, 1) and type nu in [0, 1] of the Hilfer derivative."""

    mu: float
    nu: float

    def __post_init__(self):
        if not 0.0 < self.mu < 1.0:
            raise ValueError(f"mu={self.mu} must lie in (0, 1)")
        if not 0.0 <= self.nu <= 1.0:
            raise ValueError(f"nu={self.nu} must lie in [0, 1]")

    @property
    def lam(self) -> float:
        return self.mu + self.nu - self.mu * self.nu

    @property
    def alpha(self) -> float:
        """Order nu(1-mu) of the fractional integral defining S."""
        return self.nu * (1.0 - self.mu)


@dataclass(frozen=True)
class OperatorBounds:
    M_star: float = 1.0
    N_tilde: float = 1.0

    def __post_init__(self):
        if self.M_star < 1.0 or self.N_tilde < 1.0:
            raise ValueError("M_star and N_tilde must both be >= 1")


@dataclass(frozen=True, eq=False)
class Generator:
    """Dense matrix A of the linear part; -A generates Q(t)."""

    A: np.ndarray
    symmetric_flag: bool = field(default=False)

    def __post_init__(self):
        A = np.array(self.A, dtype=float, copy=True)
        if A.ndim == 0:
            A = A.reshape(1, 1)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"generator must be square, got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValueError("generator has non-finite entries")
        if self.symmetric_flag and not np.allclose(A, A.T, rtol=0.0, atol=1e-12):
            raise ValueError("symmetric_flag set but A differs from A.T by more than 1e-12")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

    @classmethod
    def scalar(cls, a: float) -> "Generator":
        return cls(np.array([[float(a)]]), symmetric_flag=True)

    @property
    def dim(self) -> int:
        return self.A.shape[0]

    @cached_property
    def _eigh(self):
        w, V = np.linalg.eigh(self.A)
        return w, V


def _check_finite(M, what):
    if not np.all(np.isfinite(M)):
        raise OverflowError(f"{what} overflowed the floating range")
    return M


def semigroup_matrices(gen: Generator, times, C: float = 0.0) -> np.ndarray:
    """Stack of exp(-t (A + C I)) for each t in ``times``; shape (n, d, d).

    Symmetric generators go through the eigendecomposition, others through
    scaling-and-squaring Pade (``scipy.linalg.expm``).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if np.any(times < 0):
        raise ValueError("semigroup evaluated at negative time")
    if gen.symmetric_flag:
        w, V = gen._eigh
        with np.errstate(over="ignore"):
            E = np.exp(-np.outer(times, w + C))
        out = np.einsum("ij,tj,kj->tik", V, E, V)
    else:
        shifted = gen.A + C * np.eye(gen.dim)
        with np.errstate(over="ignore", invalid="ignore"):
            out = scipy.linalg.expm(-times[:, None, None] * shifted[None, :, :])
    zero = times == 0.0
    if np.any(zero):
        out[zero] = np.eye(gen.dim)
    return _check_finite(out, "exp(-tA)")


def semigroup_apply(gen: Generator, t: float, x):
    """Q(t) x = exp(-tA) x."""
    x = np.asarray(x, dtype=float)
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return x.copy()
    return _check_finite(semigroup_matrices(gen, [t])[0] @ x, "Q(t)x")


def perturbed_semigroup_apply(gen: Generator, C: float, t: float, x):
    """R(t) x = exp(-Ct) Q(t) x."""
    if C < 0:
        raise ValueError("C must be >= 0")
    return math.exp(-C * t) * semigroup_apply(gen, t, x)


def _p_star_matrix(gen, C, mu, t, n_nodes=None):
    theta, w, xi = density_rule(mu, n_nodes) if n_nodes else density_rule(mu)
    coef = w * mu * theta * xi
    R = semigroup_matrices(gen, (t**mu) * theta, C)
    return np.tensordot(coef, R, axes=1)


def p_mu_apply(gen: Generator, C: float, order: FractionalOrder, t: float, x,
               n_nodes: int | None = None):
    """P*(t) x by the fixed density quadrature over theta."""
    if not t > 0:
        raise ValueError("P*(t) requires t > 0")
    return _p_star_matrix(gen, C, order.mu, t, n_nodes) @ np.asarray(x, dtype=float)


def k_mu_apply(gen: Generator, C: float, order: FractionalOrder, t: float, x,
               n_nodes: int | None = None):
    """K*(t) x = t^(mu-1) P*(t) x."""
    if not t > 0:
        raise ValueError("K*(t) is singular at t = 0; pass t > 0")
    return t ** (order.mu - 1.0) * p_mu_apply(gen, C, order, t, x, n_nodes)


def graded_nodes(start: float, stop: float, m: int, q: float) -> np.ndarray:
    """m + 1 nodes on [start, stop] clustered toward ``start`` with exponent q."""
    j = np.arange(m + 1) / m
    nodes = start + (stop - start) * j**q
    nodes[-1] = stop
    return nodes


def s_star_weights(tau: float, lag_nodes, order: FractionalOrder):
    """Weights w_j such that S*(tau) ~= sum_j w_j P*(lag_nodes[j]).

    ``lag_nodes`` starts at 0 and ends at tau. P* is interpolated linearly in
    s^mu, and the kernel (tau - s)^(alpha-1) s^(mu-1) is integrated exactly.
    """
    alpha = order.alpha
    mu = order.mu
    return _weights.hat_weights(tau, 0.0, lag_nodes, alpha, mu, r=mu) / gamma(alpha)


def s_munu_apply(gen: Generator, C: float, order: FractionalOrder, t: float, x,
                 m: int = DEFAULT_SUBGRID, n_nodes: int | None = None):
    """S*(t) x as the fractional integral of order nu(1-mu) of s -> K*(s) x.

    Uses P* samples on an (m+1)-node subgrid of [0, t] graded toward 0.
    """
    if not t > 0:
        raise ValueError("S*(t) is singular at t = 0; pass t > 0")
    x = np.asarray(x, dtype=float)
    if order.nu == 0.0:
        return k_mu_apply(gen, C, order, t, x, n_nodes)
    q = max(2.0, 1.0 / order.lam)
    lags = graded_nodes(0.0, t, m, q)
    theta, w, xi = density_rule(order.mu, n_nodes) if n_nodes else density_rule(order.mu)
    coef = w * order.mu * theta * xi
    wts = s_star_weights(t, lags, order)
    # sum_j wts_j sum_i coef_i R(lag_j^mu theta_i), lag_0 = 0 gives R = I
    total = np.zeros((gen.dim, gen.dim))
    for lag, wt in zip(lags, wts):
        if wt == 0.0:
            continue
        R = semigroup_matrices(gen, (lag**order.mu) * theta, C)
        total += wt * np.tensordot(coef, R, axes=1)
    return total @ x


class ModalFamily:
    """Diagonal (modal) form of the shifted operator families.

    With A + C I = V diag(kappa) V^-1 every family is diagonal in the modal
    coordinates c = V^-1 x; the scalar symbol of P* at lag tau is

        F_kappa(tau) = sum_i coef_i exp(-kappa theta_i tau^mu).
    """

    def __init__(self, gen: Generator, C: float, order: FractionalOrder,
                 n_nodes: int | None = None):
        if C < 0:
            raise ValueError("C must be >= 0")
        self.gen = gen
        self.C = float(C)
        self.order = order
        theta, w, xi = density_rule(order.mu, n_nodes) if n_nodes else density_rule(order.mu)
        self.theta = theta
        self.coef = w * order.mu * theta * xi
        if gen.symmetric_flag:
            evals, V = gen._eigh
            self.V = V
            self.Vinv = V.T
        else:
            evals, V = np.linalg.eig(gen.A)
            cond = np.linalg.cond(V)
            if not np.isfinite(cond) or cond > 1e8:
                raise np.linalg.LinAlgError(
                    f"generator is too close to defective for a modal solve (cond(V)={cond:.3g})"
                )
            if np.all(np.abs(evals.imag) < 1e-14 * (1 + np.abs(evals.real))):
                evals = evals.real
                V = V.real
            self.V = V
            self.Vinv = np.linalg.inv(V)
        self.kappa = evals + self.C

    @property
    def dim(self) -> int:
        return self.gen.dim

    def to_modal(self, x):
        return np.asarray(x) @ self.Vinv.T

    def from_modal(self, c):
        out = np.asarray(c) @ self.V.T
        return out.real if np.iscomplexobj(out) else out

    def p_symbol(self, lags, chunk: int = 1 << 21):
        """F_kappa(lag) for every lag and mode; shape (len(lags), d)."""
        lags = np.asarray(lags, dtype=float).ravel()
        z = lags**self.order.mu
        out = np.empty((lags.size, self.kappa.size), dtype=self.kappa.dtype)
        # rows of the (lag, mode) x theta exponent matrix per chunk
        step = max(1, chunk // (self.kappa.size * self.theta.size))
        for start in range(0, lags.size, step):
            zz = z[start:start + step]
            arg = np.multiply.outer(np.multiply.outer(zz, self.kappa), self.theta)
            out[start:start + step] = np.exp(-arg) @ self.coef
        return out

    @property
    def weighted_limit(self):
        """Symbol of lim_{tau->0+} tau^(1-lambda) S*(tau) = Gamma(mu)/Gamma(lambda) P*(0)."""
        p0 = float(np.sum(self.coef))
        return np.full(self.kappa.shape, gamma(self.order.mu) / gamma(self.order.lam) * p0)


def estimate_bounds(gen: Generator, C: float, t_grid, N_tilde: float = 1.0):
    """Empirical (M, M*) from the induced max-row-sum norm over ``t_grid``.

    M bounds Q(t), M* bounds R(t) = exp(-Ct) Q(t); both are clipped below at 1.
    """
    t_grid = np.asarray(t_grid, dtype=float)
    Q = semigroup_matrices(gen, t_grid, 0.0)
    R = semigroup_matrices(gen, t_grid, C)
    M = max(1.0, float(np.abs(Q).sum(axis=2).max()))
    M_star = max(1.0, float(np.abs(R).sum(axis=2).max()))
    return M, OperatorBounds(M_star=M_star, N_tilde=N_tilde)


def _inf_norm(M):
    return float(np.abs(M).sum(axis=1).max())


def verify_operator_bounds(gen: Generator, C: float, order: FractionalOrder,
                           bounds, t_grid, rtol: float = 1e-8):
    """Check ||S*(t)|| <= M* t^(lambda-1)/Gamma(lambda) and ||P*(t)|| <= M*/Gamma(mu).

    ``bounds`` is an OperatorBounds or a bare M* value (which may be below 1,
    e.g. for negative controls). Operators are assembled column by column from
    basis vectors. A bound passes when its margin is >= -rtol * bound.
    """
    M_star = bounds.M_star if isinstance(bounds, OperatorBounds) else float(bounds)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size == 0 or np.any(t_grid <= 0):
        raise ValueError("t_grid must be nonempty and strictly positive")
    eye = np.eye(gen.dim)
    lam, mu = order.lam, order.mu
    rows = []
    for t in t_grid:
        S = s_munu_apply(gen, C, order, float(t), eye)
        P = p_mu_apply(gen, C, order, float(t), eye)
        bound_s = M_star * t ** (lam - 1.0) / gamma(lam)
        bound_p = M_star / gamma(mu)
        norm_s, norm_p = _inf_norm(S), _inf_norm(P)
        margin_s, margin_p = bound_s - norm_s, bound_p - norm_p
        rows.append({
            "t": float(t),
            "norm_S": norm_s, "bound_S": bound_s, "margin_S": margin_s,
            "norm_P": norm_p, "bound_P": bound_p, "margin_P": margin_p,
            "passed": bool(margin_s >= -rtol * bound_s and margin_p >= -rtol * bound_p),
        })
    return {"rows": rows, "passed": all(r["passed"] for r in rows)}
