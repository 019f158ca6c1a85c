"""Achievable rates and capacity analysis for compound channels.

Builds on the constrained divergence projection:

* ``mismatched_rate``: random-coding rate of a linear decoder scoring with a
  single-letter metric ``d`` while the true channel is ``W0``.  It is the
  minimum of ``D(mu || mu0^p)`` over joints with the marginals of ``mu0``
  whose metric expectation is at least ``E_mu0[d]``.
* ``generalized_rate``: same for a decoder taking the pointwise maximum of
  finitely many metrics; the threshold becomes ``max_k E_mu0[d_k]`` and the
  rate the minimum of the per-metric projections.
* ``compound_capacity``: ``max_P min_k I(P, W_k)`` over the input simplex by
  exponentiated-gradient ascent with iterate averaging and a weighted
  divergence upper-bound certificate.
* ``worst_channel`` / ``is_one_sided`` / ``one_sided_cover``: the geometric
  condition under which the single worst-channel metric already achieves
  capacity, and a greedy partition of a channel set into such pieces.
* ``build_metrics``: maximum-likelihood metrics ``log W_k`` and maximum a
  posteriori metrics ``log(W_k / (mu_k)_Y)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog
from scipy.optimize import minimize as opt_minimize
from scipy.special import xlogy

from .probability import (
    SUPPORT_FLOOR,
    Channel,
    Distribution,
    Joint,
    joint_of,
    kl_divergence,
    mutual_information,
)
from .projection import ProjectionResult, kl_projection

WORST_TIE_TOL = 1e-9
ONE_SIDED_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class Metric:
    """A single-letter decoding metric: an |X| x |Y| matrix of finite reals."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("Metric: expected a 2-d matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("Metric: entries must be finite")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def shifted(self, f) -> "Metric":
        """The metric d(a, b) + f(b); decisions are invariant to this."""
        return Metric(self.values + np.asarray(f, dtype=float)[None, :])


def _metric_values(d) -> np.ndarray:
    return d.values if isinstance(d, Metric) else np.asarray(d, dtype=float)


@dataclass(frozen=True)
class CompoundSet:
    """A finite set of channels with a candidate partition into components.

    ``components`` partitions channel indices into blocks meant to be
    one-sided; the default is the trivial single block.
    """

    channels: tuple[Channel, ...]
    components: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        chans = tuple(self.channels)
        if not chans:
            raise ValueError("CompoundSet: need at least one channel")
        shape = chans[0].matrix.shape
        for k, w in enumerate(chans):
            if w.matrix.shape != shape:
                raise ValueError(f"CompoundSet: channel {k} has shape {w.matrix.shape}, expected {shape}")
        comps = tuple(tuple(int(i) for i in blk) for blk in self.components)
        if not comps:
            comps = (tuple(range(len(chans))),)
        seen = [i for blk in comps for i in blk]
        if sorted(seen) != list(range(len(chans))):
            raise ValueError("CompoundSet: components must partition the channel indices")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "components", comps)

    @property
    def size(self) -> int:
        return len(self.channels)

    def restrict(self, indices) -> "CompoundSet":
        return CompoundSet(tuple(self.channels[i] for i in indices))


def mismatched_rate(input_dist: Distribution, channel: Channel, metric, **solver_kwargs) -> float:
    """Random-coding rate of the linear decoder induced by ``metric``.

    ``inf D(mu || mu0^p)`` over joints with the marginals of
    ``mu0 = input o channel`` satisfying ``E_mu[d] >= E_mu0[d]``.
    """
    d = _metric_values(metric)
    mu0 = joint_of(input_dist, channel)
    threshold = float(np.sum(mu0.matrix * d))
    res = kl_projection(
        mu0.product, mu0.x_marginal, mu0.y_marginal, d, threshold, **solver_kwargs
    )
    return res.value


def generalized_rate_detail(
    input_dist: Distribution, channel: Channel, metrics, **solver_kwargs
) -> tuple[float, ProjectionResult | None, list[float]]:
    """``generalized_rate`` plus the winning projection and per-metric values."""
    ds = [_metric_values(d) for d in metrics]
    if not ds:
        raise ValueError("generalized_rate: need at least one metric")
    mu0 = joint_of(input_dist, channel)
    base = mu0.product
    row, col = mu0.x_marginal, mu0.y_marginal
    threshold = max(float(np.sum(mu0.matrix * d)) for d in ds)
    results = [kl_projection(base, row, col, d, threshold, **solver_kwargs) for d in ds]
    values = [res.value for res in results]
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf, None, values
    best = int(np.argmin(values))
    return values[best], results[best], values


def generalized_rate(input_dist: Distribution, channel: Channel, metrics, **solver_kwargs) -> float:
    """Rate of the generalized linear decoder maximizing several metrics.

    The threshold is the best score the true joint earns across metrics;
    the rate is the smallest per-metric projection value.  Infeasible
    branches (+inf) drop out of the minimum unless every branch is
    infeasible.
    """
    value, _, _ = generalized_rate_detail(input_dist, channel, metrics, **solver_kwargs)
    return value


def _per_letter_divergences(channel_matrix: np.ndarray, output_dist: np.ndarray) -> np.ndarray:
    """D(W(.|a) || q) for every input letter a, with 0 log 0 = 0."""
    w = channel_matrix
    safe_q = np.where(output_dist > SUPPORT_FLOOR, output_dist, 1.0)
    terms = xlogy(w, w) - w * np.log(safe_q)
    return terms.sum(axis=1)


@dataclass
class CapacityResult:
    """Compound capacity value with the achieving input distribution."""

    value: float
    input_dist: Distribution
    iterations: int
    certificate_gap: float
    converged: bool

    def __iter__(self):
        # Allows ``C, P = compound_capacity(...)``.
        return iter((self.value, self.input_dist))


def _certificate_bound(grads: np.ndarray) -> float:
    """Tightest duality-style upper bound available at one input iterate.

    For any weights ``alpha`` on the channels,
    ``C <= max_a sum_k alpha_k D(W_k(.|a) || mu_kY(P))``; minimizing the
    bound over the weight simplex is a small linear program.
    """
    K, nx = grads.shape
    if K == 1:
        return float(grads.max())
    c = np.zeros(K + 1)
    c[-1] = 1.0
    a_ub = np.hstack([grads.T, -np.ones((nx, 1))])
    a_eq = np.zeros((1, K + 1))
    a_eq[0, :K] = 1.0
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=np.zeros(nx),
        A_eq=a_eq,
        b_eq=np.ones(1),
        bounds=[(0, None)] * K + [(None, None)],
        method="highs",
    )
    if not res.success:
        return math.inf
    return float(res.fun)


def compound_capacity(
    cset: CompoundSet,
    tol: float = 1e-7,
    max_iterations: int = 100_000,
) -> CapacityResult:
    """Maximize ``f(P) = min_k I(P, W_k)`` over the input simplex.

    ``f`` is concave (each mutual information is concave in ``P``).  The
    ascent phase runs exponentiated-gradient steps using a supergradient of
    the active minimum, i.e. the per-letter divergence vector
    ``a -> D(W_k*(.|a) || mu_Y)`` of the currently worst channel; with a
    single channel and unit step this is the classical alternating capacity
    iteration.  Iterates are averaged, and progress is certified by the
    weighted divergence upper bound of ``_certificate_bound``, evaluated at
    the best iterate seen.  The phase stops when the certificate gap or the
    successive-iterate change drops below ``tol``.

    Subgradient steps alone close the gap slowly when the optimum sits on a
    kink or a simplex face, so if the budget runs out first, a sequential
    quadratic epigraph polish (maximize t subject to ``I_k(P) >= t``)
    refines the iterate before the final certificate.

    The returned value is ``f`` evaluated exactly at the best iterate seen,
    hence never an overestimate of the true capacity.
    """
    mats = [w.matrix for w in cset.channels]
    K = len(mats)
    nx = mats[0].shape[0]

    def grads_at(p):
        return np.stack([_per_letter_divergences(w, p @ w) for w in mats])

    best_f = -math.inf
    best_p = None

    def note(p, grads=None):
        nonlocal best_f, best_p
        if grads is None:
            grads = grads_at(p)
        fv = float((grads @ p).min())
        if fv > best_f:
            best_f, best_p = fv, p.copy()
        return fv

    p = np.full(nx, 1.0 / nx)
    p_sum = np.zeros(nx)
    gap = math.inf
    iterations = 0
    stalled = False

    ascent_budget = min(600, max_iterations)
    for it in range(1, ascent_budget + 1):
        iterations += 1
        grads = grads_at(p)
        infos = grads @ p
        note(p, grads)
        p_sum += p
        g = grads[int(np.argmin(infos))]
        eta = 1.0 if K == 1 else 1.0 / math.sqrt(it)
        p_next = p * np.exp(eta * (g - g.max()))
        p_next /= p_next.sum()
        step = float(np.abs(p_next - p).max())
        p = p_next
        stalled = step <= min(tol, 1e-9)
        if it % 100 == 0 or stalled or it == ascent_budget:
            note(p_sum / p_sum.sum())
            gap = _certificate_bound(grads_at(best_p)) - best_f
            if gap <= tol or stalled:
                break

    if gap > tol and max_iterations > iterations:
        p_hat, nit = _epigraph_polish(mats, grads_at, best_p, best_f, K, nx)
        iterations += nit
        if p_hat is not None:
            note(p_hat)
        gap = _certificate_bound(grads_at(best_p)) - best_f

    # The LP certificate can undershoot by its own solver tolerance.
    gap = max(gap, 0.0)
    return CapacityResult(
        value=best_f,
        input_dist=Distribution(best_p),
        iterations=iterations,
        certificate_gap=gap,
        converged=gap <= tol,
    )


def _epigraph_polish(mats, grads_at, p0, f0, K, nx):
    """Refine ``max_P min_k I_k(P)`` as ``max t  s.t.  I_k(P) >= t`` on the simplex.

    The mutual-information Jacobian is ``dI_k/dp_a = D(W_k(.|a)||mu_kY) - 1``;
    warm-started sequential quadratic programming handles optima on simplex
    faces, which multiplicative ascent approaches only asymptotically.
    """

    def cons(x):
        return grads_at(x[:nx]) @ x[:nx] - x[-1]

    def cons_jac(x):
        jac = np.empty((K, nx + 1))
        jac[:, :nx] = grads_at(x[:nx]) - 1.0
        jac[:, -1] = -1.0
        return jac

    res = opt_minimize(
        lambda x: -x[-1],
        np.concatenate([p0, [f0]]),
        jac=lambda x: np.concatenate([np.zeros(nx), [-1.0]]),
        method="SLSQP",
        bounds=[(0.0, 1.0)] * nx + [(None, None)],
        constraints=[
            {"type": "ineq", "fun": cons, "jac": cons_jac},
            {
                "type": "eq",
                "fun": lambda x: x[:nx].sum() - 1.0,
                "jac": lambda x: np.concatenate([np.ones(nx), [0.0]]),
            },
        ],
        options={"maxiter": 300, "ftol": 1e-14},
    )
    p_hat = np.maximum(res.x[:nx], 0.0)
    # Boundary dust from the SQP active set is numerically dead weight.
    p_hat[p_hat < 1e-12 * p_hat.max(initial=0.0)] = 0.0
    total = p_hat.sum()
    if total <= 0.0 or not np.all(np.isfinite(p_hat)):
        return None, int(res.nit)
    return p_hat / total, int(res.nit)


@dataclass
class WorstChannelResult:
    index: int
    channel: Channel
    mutual_informations: np.ndarray
    tie: bool
    tie_indices: tuple[int, ...]

    def __iter__(self):
        return iter((self.index, self.channel))


def worst_channel(cset: CompoundSet, input_dist: Distribution, tie_tol: float = WORST_TIE_TOL) -> WorstChannelResult:
    """Channel minimizing I(P, W) over the set; flags near-ties."""
    infos = np.array([mutual_information(input_dist, w) for w in cset.channels])
    idx = int(np.argmin(infos))
    tied = tuple(int(i) for i in np.flatnonzero(infos <= infos[idx] + tie_tol))
    return WorstChannelResult(
        index=idx,
        channel=cset.channels[idx],
        mutual_informations=infos,
        tie=len(tied) > 1,
        tie_indices=tied,
    )


@dataclass
class OneSidedVerdict:
    one_sided: bool
    witness: int | None
    reason: str
    worst_index: int | None
    margins: np.ndarray | None = None

    def __bool__(self):
        return self.one_sided


def is_one_sided(
    cset: CompoundSet, input_dist: Distribution, slack: float = ONE_SIDED_SLACK
) -> OneSidedVerdict:
    """Check whether every member satisfies the worst-channel divergence split.

    With ``mu_S`` the joint of the worst channel, the set is one-sided when

        D(mu0 || mu_S^p) >= D(mu0 || mu_S) + D(mu_S || mu_S^p)

    holds for every member ``W0``.  A tied worst channel leaves the
    condition undefined; we decline to classify and return the tie as the
    witness.
    """
    worst = worst_channel(cset, input_dist)
    if worst.tie:
        return OneSidedVerdict(
            one_sided=False,
            witness=worst.tie_indices[1],
            reason=f"worst channel not unique: indices {worst.tie_indices} within {WORST_TIE_TOL}",
            worst_index=None,
        )
    mu_s = joint_of(input_dist, worst.channel)
    mu_s_p = mu_s.product
    cap_term = kl_divergence(mu_s, mu_s_p)
    margins = np.empty(cset.size)
    for k, w in enumerate(cset.channels):
        mu0 = joint_of(input_dist, w)
        lhs = kl_divergence(mu0, mu_s_p)
        rhs = kl_divergence(mu0, mu_s) + cap_term
        if math.isinf(lhs) and math.isinf(rhs):
            margins[k] = 0.0
        elif math.isinf(lhs):
            margins[k] = math.inf
        elif math.isinf(rhs):
            margins[k] = -math.inf
        else:
            margins[k] = lhs - rhs
        if margins[k] < -slack:
            return OneSidedVerdict(
                one_sided=False,
                witness=k,
                reason=f"channel {k} violates the divergence split by {margins[k]:.3e}",
                worst_index=worst.index,
                margins=margins,
            )
    return OneSidedVerdict(
        one_sided=True,
        witness=None,
        reason="all members satisfy the divergence split",
        worst_index=worst.index,
        margins=margins,
    )


def one_sided_cover(cset: CompoundSet, input_dist: Distribution) -> tuple[tuple[int, ...], ...]:
    """Greedy partition of the channel indices into one-sided blocks.

    Seeds each block with the lowest-information uncovered channel and grows
    it while the one-sided check still passes.  Valid but not necessarily
    minimal.
    """
    infos = np.array([mutual_information(input_dist, w) for w in cset.channels])
    order = list(np.argsort(infos, kind="stable"))
    remaining = [int(i) for i in order]
    blocks: list[tuple[int, ...]] = []
    while remaining:
        seed = remaining.pop(0)
        block = [seed]
        kept = []
        for cand in remaining:
            trial = block + [cand]
            if is_one_sided(cset.restrict(trial), input_dist):
                block.append(cand)
            else:
                kept.append(cand)
        remaining = kept
        blocks.append(tuple(sorted(block)))
    return tuple(blocks)


def build_metrics(kind: str, channels, input_dist: Distribution) -> list[Metric]:
    """ML metrics ``log W_k`` or MAP metrics ``log(W_k / (mu_k)_Y)``.

    Requires strictly positive channel entries so the logs stay finite;
    channels with zeros are rejected here even though they are accepted
    elsewhere.
    """
    if kind not in ("ml", "map"):
        raise ValueError(f"unknown metric kind {kind!r} (want 'ml' or 'map')")
    metrics = []
    for k, w in enumerate(channels):
        m = w.matrix
        if m.min() <= SUPPORT_FLOOR:
            raise ValueError(
                f"channel {k} has a zero entry; log metrics require strictly positive channels"
            )
        if kind == "ml":
            metrics.append(Metric(np.log(m)))
        else:
            out = joint_of(input_dist, w).y_marginal.probs
            metrics.append(Metric(np.log(m) - np.log(out)[None, :]))
    return metrics


@dataclass
class RateReport:
    """Per-channel achievable rates for one decoder family."""

    kind: str
    rates: np.ndarray
    minimum: float
    minimizers: list[Joint | None]
    metric_indices: tuple[int, ...]
    diagnostics: dict = field(default_factory=dict)


def decoder_rates(
    cset: CompoundSet,
    input_dist: Distribution,
    kind: str,
    cover: tuple[tuple[int, ...], ...] | None = None,
) -> RateReport:
    """Rates of the four standard decoder families against every member.

    ``ml`` / ``map``: a single metric from the worst channel of the whole
    set.  ``glrt`` / ``gmap``: one metric per cover block, from that block's
    worst channel.
    """
    if kind in ("ml", "map"):
        worst = worst_channel(cset, input_dist)
        metric_idx = (worst.index,)
        metrics = build_metrics(kind, [worst.channel], input_dist)
    elif kind in ("glrt", "gmap"):
        blocks = cover if cover is not None else cset.components
        # Block-local worst indices mapped back to global ones.
        metric_idx = tuple(
            blk[worst_channel(cset.restrict(blk), input_dist).index] for blk in blocks
        )
        base_kind = "ml" if kind == "glrt" else "map"
        metrics = build_metrics(base_kind, [cset.channels[i] for i in metric_idx], input_dist)
    else:
        raise ValueError(f"unknown decoder kind {kind!r}")

    rates = np.empty(cset.size)
    minimizers: list[Joint | None] = []
    bisections = 0
    fit_iters = 0
    residual = 0.0
    for k, w in enumerate(cset.channels):
        value, best, _ = generalized_rate_detail(input_dist, w, metrics)
        rates[k] = value
        minimizers.append(best.minimizer if best is not None else None)
        if best is not None:
            bisections += best.bisection_steps
            fit_iters += best.fit_iterations
            residual = max(residual, best.marginal_residual)
    return RateReport(
        kind=kind,
        rates=rates,
        minimum=float(rates.min()),
        minimizers=minimizers,
        metric_indices=metric_idx,
        diagnostics={
            "bisection_steps": bisections,
            "fit_iterations": fit_iters,
            "max_marginal_residual": residual,
        },
    )
