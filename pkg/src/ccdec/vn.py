"""The very-noisy inner-product geometry.

A channel close to pure noise can be written ``W(b|a) = N(b) (1 + e L(a,b))``
for a small ``e``, a noise distribution ``N`` on the outputs, and a
perturbation matrix ``L`` whose noise-weighted row averages vanish.  In the
``e -> 0`` limit, divergences between such channels become squared norms in
the inner-product space weighted by ``P_X x N``:

    <u, v> = sum_{a,b} P_X(a) N(b) u(a,b) v(a,b).

Writing ``Lbar(b) = sum_a P_X(a) L(a,b)`` for the output average and
``Ltil = L - Lbar`` for the centered direction, mutual information scales to
``|Ltil|^2``, and the rate of a linear decoder scoring with the
log-likelihood of direction ``L1`` while the truth is ``L0`` scales to the
squared norm of the projection of ``Ltil0`` onto ``Ltil1`` (zero when the
inner product is negative).  All limits here are normalized by ``2 / e^2``.

Closed forms for the generalized likelihood-ratio and generalized MAP
decoders follow from the same projection picture; the only subtlety is that
likelihood metrics compare raw directions while MAP metrics compare centered
ones, which is exactly what lets a likelihood-ratio family lose rate on
unions of one-sided components while the MAP family does not.

``embed`` maps a direction back to an honest channel at a finite ``e``, and
``*_gap_table`` report how fast the exact, rescaled quantities approach
their limits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probability import Channel, Distribution, Joint, _values, joint_of, kl_divergence
from .rates import Metric, mismatched_rate

VN_TIE_TOL = 1e-9
_CASE_TIE_TOL = 1e-12

# Smallest admitted entry of 1 + e L when embedding a direction.
EMBED_MIN_ENTRY = 1e-6


@dataclass(frozen=True, eq=False)
class Direction:
    """A perturbation matrix around a pure-noise output distribution.

    Rows must average to zero under the noise weights:
    ``sum_b noise(b) values(a, b) == 0`` for every input ``a``.
    """

    values: np.ndarray
    noise: Distribution

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2:
            raise ValueError("Direction: expected a 2-d matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("Direction: entries must be finite")
        if v.shape[1] != self.noise.size:
            raise ValueError("Direction: column count must match the noise alphabet")
        row_avg = v @ self.noise.probs
        if np.abs(row_avg).max() > 1e-12:
            raise ValueError(
                f"Direction: noise-weighted row averages must vanish (max {np.abs(row_avg).max():.3e})"
            )
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def nx(self) -> int:
        return self.values.shape[0]


def inner(u, v, input_dist: Distribution, noise: Distribution) -> float:
    """The (P_X x N)-weighted inner product of two direction matrices."""
    a = _values(u)
    b = _values(v)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    w = np.outer(input_dist.probs, noise.probs)
    return float(np.sum(w * a * b))


def norm_sq(u, input_dist: Distribution, noise: Distribution) -> float:
    return inner(u, u, input_dist, noise)


@dataclass(frozen=True, eq=False)
class CenteredDirection:
    """A direction split into its output average and centered part.

    ``centered = values - output_avg`` (broadcast over rows), so the
    input-weighted column averages of ``centered`` vanish.  The squared
    norms satisfy the projection identity
    ``raw_norm_sq = avg_norm_sq + centered_norm_sq``.
    """

    centered: np.ndarray
    output_avg: np.ndarray
    input_dist: Distribution
    noise: Distribution
    raw_norm_sq: float
    avg_norm_sq: float
    centered_norm_sq: float

    def inner(self, other: "CenteredDirection") -> float:
        return inner(self.centered, other.centered, self.input_dist, self.noise)


def center(direction: Direction, input_dist: Distribution) -> CenteredDirection:
    """Split a direction into output average plus centered remainder."""
    v = direction.values
    if input_dist.size != v.shape[0]:
        raise ValueError("input distribution size must match the direction rows")
    avg = input_dist.probs @ v
    til = v - avg[None, :]
    raw = norm_sq(v, input_dist, direction.noise)
    avg_sq = float(np.sum(direction.noise.probs * avg * avg))
    return CenteredDirection(
        centered=til,
        output_avg=avg,
        input_dist=input_dist,
        noise=direction.noise,
        raw_norm_sq=raw,
        avg_norm_sq=avg_sq,
        centered_norm_sq=raw - avg_sq,
    )


@dataclass(frozen=True)
class DirectionSet:
    """A finite compound set of directions sharing one noise distribution."""

    directions: tuple[Direction, ...]
    components: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        dirs = tuple(self.directions)
        if not dirs:
            raise ValueError("DirectionSet: need at least one direction")
        noise = dirs[0].noise
        shape = dirs[0].values.shape
        for k, d in enumerate(dirs):
            if d.values.shape != shape:
                raise ValueError(f"DirectionSet: direction {k} has mismatched shape")
            if not np.array_equal(d.noise.probs, noise.probs):
                raise ValueError("DirectionSet: all directions must share the noise distribution")
        comps = tuple(tuple(int(i) for i in blk) for blk in self.components)
        if not comps:
            comps = (tuple(range(len(dirs))),)
        if sorted(i for blk in comps for i in blk) != list(range(len(dirs))):
            raise ValueError("DirectionSet: components must partition the direction indices")
        object.__setattr__(self, "directions", dirs)
        object.__setattr__(self, "components", comps)

    @property
    def noise(self) -> Distribution:
        return self.directions[0].noise

    @property
    def size(self) -> int:
        return len(self.directions)


def vn_mismatched_rate(true_dir: Direction, metric_dir: Direction, input_dist: Distribution, noise: Distribution) -> float:
    """Projection rate ``<Ltil0, Ltil1>^2 / |Ltil1|^2`` (zero on a negative inner product)."""
    c0 = center(true_dir, input_dist)
    c1 = center(metric_dir, input_dist)
    denom = c1.centered_norm_sq
    if denom <= 0.0:
        return 0.0
    ip = c0.inner(c1)
    if ip < 0.0:
        return 0.0
    return ip * ip / denom


@dataclass
class VnCapacityResult:
    value: float
    worst_index: int
    norms: np.ndarray
    tie: bool
    tie_indices: tuple[int, ...]

    def __iter__(self):
        return iter((self.value, self.worst_index))


def vn_compound_capacity(dset: DirectionSet, input_dist: Distribution, tie_tol: float = VN_TIE_TOL) -> VnCapacityResult:
    """Minimum centered squared norm over the set, with the worst direction."""
    norms = np.array(
        [center(d, input_dist).centered_norm_sq for d in dset.directions]
    )
    idx = int(np.argmin(norms))
    tied = tuple(int(i) for i in np.flatnonzero(norms <= norms[idx] + tie_tol))
    return VnCapacityResult(
        value=float(norms[idx]),
        worst_index=idx,
        norms=norms,
        tie=len(tied) > 1,
        tie_indices=tied,
    )


@dataclass
class VnOneSidedVerdict:
    one_sided: bool
    witness: int | None
    reason: str
    worst_index: int | None
    margins: np.ndarray | None = None

    def __bool__(self):
        return self.one_sided


def vn_is_one_sided(dset: DirectionSet, input_dist: Distribution, slack: float = 1e-9) -> VnOneSidedVerdict:
    """Check ``|Ltil0|^2 - |LtilS|^2 - |Ltil0 - LtilS|^2 >= 0`` for every member.

    Equivalent to requiring a nonnegative inner product with the worst
    direction whose projection dominates the worst norm; both forms are
    evaluated and must agree.
    """
    cap = vn_compound_capacity(dset, input_dist)
    if cap.tie:
        return VnOneSidedVerdict(
            one_sided=False,
            witness=cap.tie_indices[1],
            reason=f"worst direction not unique: indices {cap.tie_indices}",
            worst_index=None,
        )
    cs = center(dset.directions[cap.worst_index], input_dist)
    margins = np.empty(dset.size)
    for k, d in enumerate(dset.directions):
        c0 = center(d, input_dist)
        diff = norm_sq(c0.centered - cs.centered, input_dist, dset.noise)
        margins[k] = c0.centered_norm_sq - cs.centered_norm_sq - diff
        # Cross-check via the projection form: <L0,LS> >= 0 and
        # <L0,LS>^2 / |LS|^2 >= |LS|^2.  Identical up to roundoff.
        ip = c0.inner(cs)
        alt = 2.0 * (ip - cs.centered_norm_sq)
        if abs(alt - margins[k]) > 1e-8 * max(1.0, abs(margins[k])):
            raise AssertionError("one-sided check forms disagree beyond roundoff")
        if margins[k] < -slack:
            return VnOneSidedVerdict(
                one_sided=False,
                witness=k,
                reason=f"direction {k} lies on the wrong side (margin {margins[k]:.3e})",
                worst_index=cap.worst_index,
                margins=margins,
            )
    return VnOneSidedVerdict(
        one_sided=True,
        witness=None,
        reason="all members project beyond the worst direction",
        worst_index=cap.worst_index,
        margins=margins,
    )


def _branch_rates(norm_tab, winner_score, taus_fn, num_metrics):
    rates = []
    for k in range(num_metrics):
        tau = taus_fn(k, winner_score)
        den = norm_tab[k]
        if tau <= 0.0:
            rates.append(0.0)
        elif den <= 0.0:
            rates.append(math.inf)
        else:
            rates.append(tau * tau / den)
    return min(rates)


def vn_glrt_rate(true_dir: Direction, worsts, input_dist: Distribution, noise: Distribution) -> float:
    """Rate of the generalized likelihood-ratio decoder with the given metrics.

    The score threshold is set by whichever metric direction the true joint
    likes best, decided by comparing raw (non-centered) distances; ties on
    the case boundary are resolved adversarially by evaluating every tied
    case and keeping the minimum.
    """
    worsts = list(worsts)
    if not worsts:
        raise ValueError("vn_glrt_rate: need at least one metric direction")
    c0 = center(true_dir, input_dist)
    cs = [center(d, input_dist) for d in worsts]
    l0 = true_dir.values
    # Case score of metric l: <L0, Ll> - |Ll|^2 / 2, larger means closer in
    # the raw metric distance.
    scores = np.array(
        [
            inner(l0, d.values, input_dist, noise)
            - 0.5 * norm_sq(d.values, input_dist, noise)
            for d in worsts
        ]
    )
    smax = float(scores.max())
    winners = np.flatnonzero(scores >= smax - _CASE_TIE_TOL * max(1.0, abs(smax)))
    cent_norms = [c.centered_norm_sq for c in cs]
    bar_ips = [
        float(np.sum(noise.probs * c0.output_avg * c.output_avg)) for c in cs
    ]

    def taus(k, winner_score):
        raw_k = norm_sq(worsts[k].values, input_dist, noise)
        return winner_score + 0.5 * raw_k - bar_ips[k]

    return min(
        _branch_rates(cent_norms, float(scores[w]), taus, len(worsts)) for w in winners
    )


def vn_gmap_rate(true_dir: Direction, worsts, input_dist: Distribution, noise: Distribution) -> float:
    """Rate of the generalized MAP decoder with the given metric directions.

    Same structure as the likelihood-ratio case, but both the case decision
    and the thresholds live in centered coordinates, which is what restores
    the one-sided guarantee.
    """
    worsts = list(worsts)
    if not worsts:
        raise ValueError("vn_gmap_rate: need at least one metric direction")
    c0 = center(true_dir, input_dist)
    cs = [center(d, input_dist) for d in worsts]
    scores = np.array([c0.inner(c) - 0.5 * c.centered_norm_sq for c in cs])
    smax = float(scores.max())
    winners = np.flatnonzero(scores >= smax - _CASE_TIE_TOL * max(1.0, abs(smax)))
    cent_norms = [c.centered_norm_sq for c in cs]

    def taus(k, winner_score):
        return winner_score + 0.5 * cent_norms[k]

    return min(
        _branch_rates(cent_norms, float(scores[w]), taus, len(worsts)) for w in winners
    )


def embed(direction: Direction, eps: float) -> Channel:
    """The channel ``N(b) (1 + eps L(a,b))`` at a finite perturbation size.

    Rejects ``eps`` values that push any factor ``1 + eps L`` below
    ``EMBED_MIN_ENTRY``: embedded channels must stay strictly positive
    wherever the noise is.
    """
    factors = 1.0 + eps * direction.values
    if factors.min() < EMBED_MIN_ENTRY:
        raise ValueError(
            f"eps={eps} is inadmissible: 1 + eps*L reaches {factors.min():.3e}"
        )
    m = direction.noise.probs[None, :] * factors
    return Channel(m / m.sum(axis=1, keepdims=True))


def embedded_joint(direction: Direction, input_dist: Distribution, eps: float) -> Joint:
    return joint_of(input_dist, embed(direction, eps))


@dataclass
class GapRow:
    """One row of a convergence table: exact rescaled value vs. its limit."""

    eps: float
    scaled: float
    limit: float
    gap: float


def divergence_gap_table(dist: Distribution, direction, eps_list) -> list[GapRow]:
    """How fast ``(2/e^2) D(p(1+ev) || p)`` approaches the weighted norm of v."""
    p = dist.probs
    v = np.asarray(direction, dtype=float)
    if abs(float(np.sum(p * v))) > 1e-9:
        raise ValueError("direction must be p-orthogonal to constants: sum p*v = 0")
    limit = float(np.sum(p * v * v))
    rows = []
    for eps in eps_list:
        perturbed = p * (1.0 + eps * v)
        if perturbed.min() < 0.0:
            raise ValueError(f"eps={eps} leaves the simplex")
        exact = kl_divergence(perturbed / perturbed.sum(), p)
        scaled = 2.0 / eps**2 * exact
        rows.append(GapRow(eps, scaled, limit, abs(scaled - limit)))
    return rows


def expected_log_gap_table(
    dirs: tuple[Direction, Direction, Direction, Direction],
    input_dist: Distribution,
    eps_list,
) -> list[GapRow]:
    """Second-order expansion check for differences of expected log metrics.

    For directions (i, j, k, l) with matching input-averaged first pair, the
    difference ``E_(mu_i) log W_j - E_(mu_k) log W_l`` rescaled by ``2/e^2``
    tends to ``2 [ (<Li,Lj> - |Lj|^2/2) - (<Lk,Ll> - |Ll|^2/2) ]``.
    """
    di, dj, dk, dl = dirs
    noise = di.noise
    avg_i = input_dist.probs @ di.values
    avg_k = input_dist.probs @ dk.values
    if np.abs(avg_i - avg_k).max() > 1e-9:
        raise ValueError("first and third directions must share the input-averaged row")

    def half_score(a: Direction, b: Direction) -> float:
        return inner(a.values, b.values, input_dist, noise) - 0.5 * norm_sq(
            b.values, input_dist, noise
        )

    limit = 2.0 * (half_score(di, dj) - half_score(dk, dl))
    rows = []
    for eps in eps_list:
        mu_i = embedded_joint(di, input_dist, eps).matrix
        mu_k = embedded_joint(dk, input_dist, eps).matrix
        log_wj = np.log(embed(dj, eps).matrix)
        log_wl = np.log(embed(dl, eps).matrix)
        e_ij = float(np.sum(mu_i * log_wj))
        e_kl = float(np.sum(mu_k * log_wl))
        scaled = 2.0 / eps**2 * (e_ij - e_kl)
        rows.append(GapRow(eps, scaled, limit, abs(scaled - limit)))
    return rows


def mismatched_rate_gap_table(
    true_dir: Direction,
    metric_dir: Direction,
    input_dist: Distribution,
    eps_list,
) -> list[GapRow]:
    """Exact solver rate on embedded channels vs. the projection limit."""
    limit = vn_mismatched_rate(true_dir, metric_dir, input_dist, true_dir.noise)
    rows = []
    for eps in eps_list:
        w0 = embed(true_dir, eps)
        d = Metric(np.log(embed(metric_dir, eps).matrix))
        exact = mismatched_rate(input_dist, w0, d)
        scaled = 2.0 / eps**2 * exact
        rows.append(GapRow(eps, scaled, limit, abs(scaled - limit)))
    return rows


def vn_limit_gap(kind: str, instance: dict, eps_list) -> list[GapRow]:
    """Dispatch on the convergence-table kind; see the specific tables."""
    if kind == "divergence":
        return divergence_gap_table(instance["dist"], instance["direction"], eps_list)
    if kind == "expected_log":
        return expected_log_gap_table(
            tuple(instance["directions"]), instance["input"], eps_list
        )
    if kind == "mismatched_rate":
        return mismatched_rate_gap_table(
            instance["true"], instance["metric"], instance["input"], eps_list
        )
    raise ValueError(f"unknown gap table kind {kind!r}")


@dataclass
class BlindPolytopeResult:
    """Guaranteed rate of a compound-set-agnostic metric family."""

    value: float
    capacity: float
    ratio: float
    limiting_index: int

    def __iter__(self):
        return iter((self.value, self.ratio))


def blind_polytope_rate(metric_dirs, dset: DirectionSet, input_dist: Distribution) -> BlindPolytopeResult:
    """Worst-case projection rate of fixed metric directions over a set.

    ``min over members of max over metrics`` of the one-sided projection
    rate; the ratio to the set's own capacity measures what the fixed
    family gives up for not knowing the set.
    """
    metric_dirs = list(metric_dirs)
    if not metric_dirs:
        raise ValueError("blind_polytope_rate: need at least one metric direction")
    cents = []
    for u in metric_dirs:
        c = u if isinstance(u, CenteredDirection) else center(u, input_dist)
        if c.centered_norm_sq <= 0.0:
            raise ValueError("blind metric directions must have nonzero centered part")
        cents.append(c)
    noise = dset.noise
    best_min = math.inf
    arg = 0
    for k, d in enumerate(dset.directions):
        c0 = center(d, input_dist)
        best = 0.0
        for c in cents:
            ip = inner(c0.centered, c.centered, input_dist, noise)
            if ip > 0.0:
                best = max(best, ip * ip / c.centered_norm_sq)
        if best < best_min:
            best_min = best
            arg = k
    cap = vn_compound_capacity(dset, input_dist).value
    ratio = math.inf if cap <= 0.0 else best_min / cap
    return BlindPolytopeResult(value=best_min, capacity=cap, ratio=ratio, limiting_index=arg)
