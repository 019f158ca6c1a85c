"""Divergence projection onto a transportation polytope slice.

This module solves the constrained information projection

    minimize   D(mu || base)
    over       mu with mu_X = row,  mu_Y = col,  E_mu[score] >= threshold,

which is the core primitive behind mismatched- and generalized-decoder
achievable rates.  The feasible set is the transportation polytope with the
given marginals, cut by one linear inequality.

Solution structure
------------------
If the unconstrained minimizer (``base`` itself, assuming it carries the
required marginals) already satisfies the expectation constraint, the value
is 0.  Otherwise the constraint is active and Lagrangian duality gives the
minimizer an exponential-family form

    mu(a, b)  proportional to  u(a) * v(b) * base(a, b) * exp(lam * score(a, b))

with multiplier ``lam >= 0``.  For a fixed ``lam`` the potentials ``u, v``
are fitted by iterative proportional fitting (Sinkhorn scaling) so that the
marginals match; after fitting, ``E_mu[score]`` is nondecreasing in ``lam``,
so the active multiplier is located by bisection.

All scaling runs in the log domain: multipliers up to the cap ``1e4`` times
log-probability scores would overflow any direct kernel.

Infeasibility
-------------
``E_mu[score]`` tends to the maximum of the linear functional over the
polytope only as ``lam`` grows without bound.  If the multiplier reaches the
cap while the expectation is still short of the threshold by more than
``INFEASIBLE_SLACK``, the constraint set is declared empty and the value is
the ``+inf`` sentinel (not an exception: infima over constrained families
legitimately touch this boundary).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp

from .probability import SUPPORT_FLOOR, Distribution, Joint, _values

LAMBDA_CAP = 1e4
INFEASIBLE_SLACK = 1e-6


class SolverError(RuntimeError):
    """Raised when an iterative fit fails to converge."""


@dataclass
class ProjectionResult:
    """Outcome of ``kl_projection``.

    ``value`` is in nats (``math.inf`` when the constraint set is empty);
    ``minimizer`` is the optimal joint (None when infeasible).  The remaining
    fields are solver diagnostics.
    """

    value: float
    minimizer: Joint | None
    multiplier: float
    bisection_steps: int
    fit_iterations: int
    marginal_residual: float
    constraint_gap: float
    feasible: bool


def _polytope_max(support: np.ndarray, r: np.ndarray, c: np.ndarray, d: np.ndarray) -> float:
    """Maximum of ``E_mu[d]`` over joints with marginals (r, c) on the support.

    A small transportation linear program; used to recognize unreachable
    thresholds without chasing the multiplier to its cap.
    """
    nx, ny = d.shape
    idx = np.flatnonzero(support.ravel())
    a_eq = np.zeros((nx + ny, idx.size))
    for col, flat in enumerate(idx):
        a, b = divmod(int(flat), ny)
        a_eq[a, col] = 1.0
        a_eq[nx + b, col] = 1.0
    res = linprog(
        -d.ravel()[idx],
        A_eq=a_eq,
        b_eq=np.concatenate([r, c]),
        bounds=(0.0, None),
        method="highs",
    )
    if not res.success:
        return math.inf
    return float(-res.fun)


def _log_fit(log_kernel, log_r, log_c, r, c, u, v, marginal_tol, max_iters):
    """Fit log-potentials so exp(log_kernel + u + v') has marginals (r, c)."""
    resid = math.inf
    with np.errstate(invalid="ignore"):
        for it in range(1, max_iters + 1):
            u = log_r - logsumexp(log_kernel + v[None, :], axis=1)
            u[np.isnan(u)] = -np.inf  # dead row: -inf marginal minus -inf mass
            v = log_c - logsumexp(log_kernel + u[:, None], axis=0)
            v[np.isnan(v)] = -np.inf
            if it % 2 == 0 or it == max_iters:
                mu = np.exp(log_kernel + u[:, None] + v[None, :])
                resid = max(
                    np.abs(mu.sum(axis=1) - r).max(),
                    np.abs(mu.sum(axis=0) - c).max(),
                )
                if resid <= marginal_tol:
                    return mu, u, v, it, resid
    raise SolverError(
        f"marginal fitting stalled: residual {resid:.3e} after {max_iters} iterations"
    )


def kl_projection(
    base: Joint,
    row: Distribution,
    col: Distribution,
    score,
    threshold: float,
    *,
    marginal_tol: float = 1e-10,
    constraint_tol: float = 1e-8,
    lambda_cap: float = LAMBDA_CAP,
    max_fit_iters: int = 5000,
    max_bisections: int = 120,
) -> ProjectionResult:
    """Project ``base`` onto {mu : mu_X = row, mu_Y = col, E_mu[score] >= threshold}.

    Parameters
    ----------
    base : Joint
        Reference joint; the caller normally passes the product distribution
        ``mu0^p`` whose marginals are exactly (row, col).
    row, col : Distribution
        Required X and Y marginals of the feasible joints.
    score : array_like
        |X| x |Y| score matrix (finite entries).
    threshold : float
        Lower bound on ``E_mu[score]``.

    Returns
    -------
    ProjectionResult
        ``value = inf D(mu || base)`` with a minimizer, or the ``+inf``
        sentinel when the constraint set is empty.
    """
    b = base.matrix
    r = _values(row)
    c = _values(col)
    d = np.asarray(score, dtype=float)
    if d.shape != b.shape:
        raise ValueError(f"score shape {d.shape} does not match base {b.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("score entries must be finite")
    if not math.isfinite(threshold):
        raise ValueError("threshold must be finite")

    base_expect = float(np.sum(b * d))
    if base_expect >= threshold:
        # Constraint inactive: base itself is optimal.
        return ProjectionResult(
            value=0.0,
            minimizer=base,
            multiplier=0.0,
            bisection_steps=0,
            fit_iterations=0,
            marginal_residual=0.0,
            constraint_gap=base_expect - threshold,
            feasible=True,
        )

    # Exact positivity here, not the display floor: a tiny-but-alive marginal
    # must keep its kernel row alive or the scaling equations turn inconsistent.
    support = b > 0.0
    with np.errstate(divide="ignore"):
        log_b = np.where(support, np.log(np.where(support, b, 1.0)), -np.inf)
        log_r = np.where(r > 0.0, np.log(np.where(r > 0.0, r, 1.0)), -np.inf)
        log_c = np.where(c > 0.0, np.log(np.where(c > 0.0, c, 1.0)), -np.inf)

    u = np.zeros_like(r)
    v = np.zeros_like(c)
    total_fit_iters = 0

    def fit(lam, u0, v0):
        # The scaling slows down as the kernel concentrates; grow the budget.
        nonlocal total_fit_iters
        budget = min(200_000, max_fit_iters + int(12.0 * lam))
        mu, uu, vv, its, resid = _log_fit(
            log_b + lam * d, log_r, log_c, r, c, u0, v0, marginal_tol, budget
        )
        total_fit_iters += its
        return mu, float(np.sum(mu * d)), uu, vv, resid

    def infeasible(expect, resid):
        return ProjectionResult(
            value=math.inf,
            minimizer=None,
            multiplier=lambda_cap,
            bisection_steps=0,
            fit_iterations=total_fit_iters,
            marginal_residual=resid,
            constraint_gap=expect - threshold,
            feasible=False,
        )

    # Bracket the active multiplier: expand until E(lam) clears the threshold.
    lo = 0.0
    hi = 1.0
    capped = False
    reachable = None
    while True:
        hi = min(hi, lambda_cap)
        mu, expect, u, v, resid = fit(hi, u, v)
        if expect >= threshold:
            break
        lo = hi
        if hi >= lambda_cap:
            capped = True
            break
        hi *= 2.0
        if hi > 64.0 and reachable is None:
            # Chasing a threshold beyond the reachable maximum: settle it with
            # the transportation LP before driving the kernel tropical.
            reachable = _polytope_max(support, r, c, d)
            if threshold > reachable + INFEASIBLE_SLACK:
                return infeasible(reachable, resid)

    if capped and expect < threshold - INFEASIBLE_SLACK:
        # The threshold exceeds the maximum of the functional over the polytope.
        return infeasible(expect, resid)

    # Bisection on the monotone map lam -> E(lam).
    steps = 0
    lam = hi
    if not capped:
        target_tol = min(constraint_tol, 1e-10)
        for steps in range(1, max_bisections + 1):
            if abs(expect - threshold) <= target_tol or hi - lo <= 1e-15 * max(1.0, hi):
                break
            lam = 0.5 * (lo + hi)
            mu, expect, u, v, resid = fit(lam, u, v)
            if expect >= threshold:
                hi = lam
            else:
                lo = lam
        if expect < threshold:
            # Land on the feasible side of the bracket.
            mu, expect, u, v, resid = fit(hi, u, v)
            lam = hi

    on = mu > SUPPORT_FLOOR
    log_ratio = np.log(np.where(on, mu, 1.0)) - np.where(on, log_b, 0.0)
    value = max(0.0, float(np.sum(np.where(on, mu * log_ratio, 0.0))))
    minimizer = Joint(np.maximum(mu, 0.0) / mu.sum())
    return ProjectionResult(
        value=value,
        minimizer=minimizer,
        multiplier=lam,
        bisection_steps=steps,
        fit_iterations=total_fit_iters,
        marginal_residual=resid,
        constraint_gap=float(expect - threshold),
        feasible=True,
    )
