"""Random-codebook decoder simulation.

Codebooks are drawn i.i.d. from the input distribution, words are sent
through a memoryless channel, and decoders score codewords through the
joint empirical type of (codeword, received word): linear decoders take the
type-expectation of one metric, generalized decoders the maximum over
several, and the MMI decoder the mutual information of the type itself.

Two error estimators share the same estimand (the ensemble-average error of
a fresh random codebook per trial):

* ``method="codebook"`` materializes the codebook and decodes, which caps
  the number of codewords at desk scale;
* ``method="ensemble"`` draws only the true codeword and the channel output,
  then integrates the remaining ``M - 1`` i.i.d. competitors analytically.
  Conditioned on the received word, the competitor's joint type has
  independent per-output-symbol multinomial columns, so the exceedance
  probability of the true score is an exact finite sum.  A Bernoulli draw
  with the resulting conditional error probability keeps the trial counts
  honest, and the running mean of the conditional probabilities is also
  recorded (it resolves error probabilities far below 1/trials).

Ties are scored pessimistically: a competitor matching the true score
counts as an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, xlogy

from .probability import Channel, Distribution
from .rates import CompoundSet, Metric, _metric_values

CODEWORD_CAP = 2**14
_WILSON_Z = 1.959963984540054  # 95% two-sided normal quantile
_TYPE_BUDGET = 2_000_000

# Scores within this relative band of the maximum count as tied.  Makes the
# decoded index invariant under metric shifts d(a,b) + f(b), which move every
# score by the same amount exactly in real arithmetic but not in floats.
_TIE_BAND = 1e-11


def _tie_threshold(s_max: float) -> float:
    return s_max - _TIE_BAND * max(1.0, abs(s_max))


@dataclass(frozen=True, eq=False)
class Codebook:
    """M codewords of length n over the input alphabet."""

    words: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.words)
        if w.ndim != 2 or w.shape[0] < 1:
            raise ValueError("Codebook: expected an (M, n) symbol array")
        object.__setattr__(self, "words", w)

    @property
    def num_codewords(self) -> int:
        return self.words.shape[0]

    @property
    def block_length(self) -> int:
        return self.words.shape[1]


def generate_codebook(input_dist: Distribution, block_length: int, num_codewords: int, seed) -> Codebook:
    """Draw every symbol i.i.d. from the input distribution; deterministic in the seed."""
    if block_length < 1:
        raise ValueError("block_length must be at least 1")
    if num_codewords < 2:
        raise ValueError("need at least 2 codewords")
    rng = np.random.default_rng(seed)
    words = rng.choice(input_dist.size, size=(num_codewords, block_length), p=input_dist.probs)
    return Codebook(words.astype(np.int64))


def transmit(channel: Channel, codeword, seed) -> np.ndarray:
    """Pass a codeword through the channel, sampling each symbol independently."""
    x = np.asarray(codeword)
    rng = np.random.default_rng(seed)
    cum = np.cumsum(channel.matrix, axis=1)
    u = rng.random(x.shape[0])
    y = (cum[x] <= u[:, None]).sum(axis=1)
    return np.minimum(y, channel.ny - 1).astype(np.int64)


@dataclass(frozen=True)
class DecoderSpec:
    """Which score a decoder assigns to a codeword's joint type with y."""

    kind: str  # "linear" | "generalized" | "mmi"
    metrics: tuple[Metric, ...] = ()
    tie_policy: str = "pessimistic"

    def __post_init__(self):
        if self.kind not in ("linear", "generalized", "mmi"):
            raise ValueError(f"unknown decoder kind {self.kind!r}")
        if self.kind == "linear" and len(self.metrics) != 1:
            raise ValueError("linear decoder takes exactly one metric")
        if self.kind == "generalized" and len(self.metrics) < 1:
            raise ValueError("generalized decoder needs at least one metric")
        if self.kind == "mmi" and self.metrics:
            raise ValueError("mmi decoder takes no metrics")

    @staticmethod
    def linear(metric: Metric) -> "DecoderSpec":
        return DecoderSpec("linear", (metric,))

    @staticmethod
    def generalized(metrics) -> "DecoderSpec":
        return DecoderSpec("generalized", tuple(metrics))

    @staticmethod
    def mmi() -> "DecoderSpec":
        return DecoderSpec("mmi")


def joint_type_counts(words: np.ndarray, received: np.ndarray, nx: int, ny: int) -> np.ndarray:
    """Per-codeword joint symbol counts with the received word: (M, nx, ny)."""
    m, n = words.shape
    flat = words * ny + received[None, :]
    offsets = (np.arange(m) * (nx * ny))[:, None]
    counts = np.bincount((flat + offsets).ravel(), minlength=m * nx * ny)
    return counts.reshape(m, nx, ny)


def _type_mutual_information(counts: np.ndarray, n: int) -> np.ndarray:
    """Mutual information (nats) of each joint type; zeros contribute nothing."""
    p = counts / n
    px = p.sum(axis=2)
    py = p.sum(axis=1)
    h_xy = -xlogy(p, p).sum(axis=(1, 2))
    h_x = -xlogy(px, px).sum(axis=1)
    h_y = -xlogy(py, py).sum(axis=1)
    return h_x + h_y - h_xy


def score_codewords(received: np.ndarray, codebook: Codebook, spec: DecoderSpec, nx: int, ny: int) -> np.ndarray:
    """Score every codeword against the received word via its joint type."""
    n = codebook.block_length
    counts = joint_type_counts(codebook.words, received, nx, ny)
    if spec.kind == "mmi":
        return _type_mutual_information(counts, n)
    flat = counts.reshape(codebook.num_codewords, -1)
    per_metric = np.stack(
        [flat @ _metric_values(d).ravel() / n for d in spec.metrics]
    )
    if spec.kind == "linear":
        return per_metric[0]
    return per_metric.max(axis=0)


def decode(received: np.ndarray, codebook: Codebook, spec: DecoderSpec, nx: int, ny: int) -> int:
    """Index of the best-scoring codeword (lowest index within the tie band)."""
    if received.shape[0] != codebook.block_length:
        raise ValueError("received word length must match the codebook")
    scores = score_codewords(received, codebook, spec, nx, ny)
    return int(np.argmax(scores >= _tie_threshold(float(scores.max()))))


def wilson_interval(errors: int, trials: int, z: float = _WILSON_Z) -> tuple[float, float]:
    if trials == 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1.0 - p) / trials + z * z / (4 * trials * trials)) / denom
    low = 0.0 if errors == 0 else max(0.0, centre - half)
    high = 1.0 if errors == trials else min(1.0, centre + half)
    return low, high


@dataclass
class TrialStats:
    """Error statistics for one channel of a compound set."""

    channel_index: int
    trials: int
    errors: int
    tie_errors: int
    error_rate: float
    wilson_low: float
    wilson_high: float
    mean_error_prob: float | None
    num_codewords: int
    block_length: int
    method: str
    tie_policy: str
    seed: int

    def __post_init__(self):
        if self.errors > self.trials:
            raise ValueError("errors cannot exceed trials")


def _column_compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _column_compositions(total - head, parts - 1):
            yield (head,) + (rest)


def _binary_exceedance(y_counts, input_dist, spec, n, threshold):
    """Exact P(score(type) >= threshold) for binary inputs.

    The competitor's type is determined by, for each output symbol b, how
    many of the n_b positions carry input symbol 1; the counts are
    independent binomials.
    """
    p1 = float(input_dist.probs[1])
    axes = []
    logprob = np.zeros(())
    for n_b in y_counts:
        j = np.arange(n_b + 1)
        lp = (
            gammaln(n_b + 1)
            - gammaln(j + 1)
            - gammaln(n_b - j + 1)
            + xlogy(j, p1)
            + xlogy(n_b - j, 1.0 - p1)
        )
        axes.append(j)
        logprob = logprob[..., None] + lp
    grids = np.meshgrid(*axes, indexing="ij")

    if spec.kind == "mmi":
        h_xy = np.zeros_like(logprob)
        ones = np.zeros_like(logprob)
        for b, n_b in enumerate(y_counts):
            jb = grids[b]
            h_xy -= xlogy(jb / n, jb / n) + xlogy((n_b - jb) / n, (n_b - jb) / n)
            ones = ones + jb
        r1 = ones / n
        r0 = 1.0 - r1
        h_x = -(xlogy(r1, r1) + xlogy(r0, r0))
        h_y = -sum(xlogy(n_b / n, n_b / n) for n_b in y_counts)
        score = h_x + h_y - h_xy
    else:
        per_metric = []
        for d in spec.metrics:
            dv = _metric_values(d)
            s = np.zeros_like(logprob)
            for b, n_b in enumerate(y_counts):
                s = s + n_b * dv[0, b] + grids[b] * (dv[1, b] - dv[0, b])
            per_metric.append(s / n)
        score = per_metric[0]
        for s in per_metric[1:]:
            score = np.maximum(score, s)

    mask = score >= threshold
    if not mask.any():
        return 0.0
    return float(np.exp(logprob[mask]).sum())


def _general_exceedance(y_counts, input_dist, spec, n, threshold):
    """Exact competitor exceedance for small non-binary alphabets."""
    nx = input_dist.size
    budget = 1
    for n_b in y_counts:
        budget *= math.comb(n_b + nx - 1, nx - 1)
        if budget > _TYPE_BUDGET:
            raise ValueError(
                "analytic competitor integration too large for this alphabet; "
                "use method='codebook'"
            )
    log_p = np.log(np.maximum(input_dist.probs, 1e-300))
    per_col = []
    for n_b in y_counts:
        entries = []
        for comp in _column_compositions(n_b, nx):
            c = np.array(comp)
            lp = gammaln(n_b + 1) - gammaln(c + 1).sum() + float(c @ log_p)
            entries.append((c, lp))
        per_col.append(entries)

    metrics = [_metric_values(d) for d in spec.metrics]
    total = 0.0

    def rec(b, counts, lp):
        nonlocal total
        if b == len(per_col):
            if spec.kind == "mmi":
                p = counts / n
                px = p.sum(axis=1)
                py = p.sum(axis=0)
                score = (
                    -xlogy(px, px).sum() - xlogy(py, py).sum() + xlogy(p, p).sum()
                )
            else:
                score = max(float((counts * d).sum()) / n for d in metrics)
            if score >= threshold:
                total += math.exp(lp)
            return
        for c, clp in per_col[b]:
            counts[:, b] = c
            rec(b + 1, counts, lp + clp)

    rec(0, np.zeros((nx, len(y_counts))), 0.0)
    return min(total, 1.0)


def _true_score(x, y, spec, nx, ny, n):
    counts = joint_type_counts(x[None, :], y, nx, ny)
    if spec.kind == "mmi":
        return float(_type_mutual_information(counts, n)[0])
    flat = counts.reshape(-1)
    return max(float(flat @ _metric_values(d).ravel()) / n for d in spec.metrics)


def estimate_error(
    cset: CompoundSet,
    spec: DecoderSpec,
    input_dist: Distribution,
    block_length: int,
    rate_bits: float,
    trials: int,
    seed: int,
    *,
    method: str = "codebook",
    fresh_codebook: bool = True,
    max_codewords: int = CODEWORD_CAP,
) -> list[TrialStats]:
    """Per-channel error statistics at rate ``rate_bits`` (bits per symbol).

    The codeword count is ``M = ceil(2^(n * rate_bits))``.  In codebook mode
    M must respect ``max_codewords``; ensemble mode handles any M.
    """
    if rate_bits <= 0.0:
        raise ValueError("rate_bits must be positive")
    if method not in ("codebook", "ensemble"):
        raise ValueError(f"unknown method {method!r}")
    n = block_length
    num_codewords = max(2, math.ceil(2.0 ** (n * rate_bits)))
    if method == "codebook" and num_codewords > max_codewords:
        raise ValueError(
            f"M={num_codewords} codewords exceeds the cap {max_codewords}; "
            "lower the rate or blocklength, or use method='ensemble'"
        )
    if method == "ensemble" and not fresh_codebook:
        raise ValueError("ensemble mode always redraws the codebook")

    nx = cset.channels[0].nx
    ny = cset.channels[0].ny
    if input_dist.size != nx:
        raise ValueError("input distribution does not match the channel input alphabet")
    binary_fast = nx == 2

    out = []
    for ch_idx, channel in enumerate(cset.channels):
        errors = 0
        tie_errors = 0
        prob_sum = 0.0
        fixed = None
        if method == "codebook" and not fresh_codebook:
            fixed = generate_codebook(input_dist, n, num_codewords, [seed, 0])
        for t in range(trials):
            if method == "codebook":
                cb = fixed if fixed is not None else generate_codebook(
                    input_dist, n, num_codewords, [seed, ch_idx, t, 0]
                )
                msg = int(np.random.default_rng([seed, ch_idx, t, 1]).integers(cb.num_codewords))
                y = transmit(channel, cb.words[msg], [seed, ch_idx, t, 2])
                scores = score_codewords(y, cb, spec, nx, ny)
                s_true = float(scores[msg])
                cut = _tie_threshold(float(scores.max()))
                winners = int((scores >= cut).sum())
                tied = s_true >= cut and winners > 1
                if tied:
                    tie_errors += 1
                if s_true < cut or tied:
                    errors += 1
            else:
                x = np.random.default_rng([seed, ch_idx, t, 0]).choice(
                    nx, size=n, p=input_dist.probs
                )
                y = transmit(channel, x, [seed, ch_idx, t, 2])
                cut = _tie_threshold(_true_score(x, y, spec, nx, ny, n))
                y_counts = np.bincount(y, minlength=ny)
                if binary_fast:
                    q = _binary_exceedance(y_counts, input_dist, spec, n, cut)
                else:
                    q = _general_exceedance(y_counts, input_dist, spec, n, cut)
                q = min(max(q, 0.0), 1.0)
                if q >= 1.0:
                    e = 1.0
                else:
                    e = -math.expm1((num_codewords - 1) * math.log1p(-q))
                prob_sum += e
                if np.random.default_rng([seed, ch_idx, t, 3]).random() < e:
                    errors += 1
        low, high = wilson_interval(errors, trials)
        out.append(
            TrialStats(
                channel_index=ch_idx,
                trials=trials,
                errors=errors,
                tie_errors=tie_errors,
                error_rate=errors / trials if trials else 0.0,
                wilson_low=low,
                wilson_high=high,
                mean_error_prob=prob_sum / trials if method == "ensemble" and trials else None,
                num_codewords=num_codewords,
                block_length=n,
                method=method,
                tie_policy=spec.tie_policy,
                seed=seed,
            )
        )
    return out
