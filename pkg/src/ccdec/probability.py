"""Exact finite-alphabet probability primitives.

Distributions, discrete memoryless channels (row-stochastic matrices) and
joint distributions over X x Y, together with KL divergence and mutual
information.  Everything is computed in nats; conversion to bits is a
display concern (divide by ``log(2)``).

Probabilities below ``SUPPORT_FLOOR`` are treated as exact zeros when
deciding support questions, so ``0 * log(0 / q) == 0`` and a KL divergence
with a genuine support violation returns ``math.inf`` rather than raising.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Numeric noise floor: anything below this counts as an exact zero.
SUPPORT_FLOOR = 1e-15

# Tolerance on "sums to one" invariants.
SUM_TOL = 1e-12

NATS_PER_BIT = math.log(2.0)


def nats_to_bits(x: float) -> float:
    return x / NATS_PER_BIT


def _validated(arr, name: str) -> np.ndarray:
    a = np.array(arr, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name}: entries must be finite")
    if a.min(initial=0.0) < -SUM_TOL:
        raise ValueError(f"{name}: negative entry {a.min()}")
    a = np.maximum(a, 0.0)
    a.flags.writeable = False
    return a


def _values(x) -> np.ndarray:
    """Unwrap Distribution/Channel/Joint to the underlying array."""
    if isinstance(x, Distribution):
        return x.probs
    if isinstance(x, (Channel, Joint)):
        return x.matrix
    return np.asarray(x, dtype=float)


@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector over a finite alphabet."""

    probs: np.ndarray

    def __post_init__(self):
        p = _validated(self.probs, "Distribution")
        if p.ndim != 1:
            raise ValueError("Distribution: expected a 1-d vector")
        if abs(p.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"Distribution: entries sum to {p.sum()}, not 1")
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return self.probs.shape[0]

    @property
    def support(self) -> np.ndarray:
        return self.probs > SUPPORT_FLOOR

    @staticmethod
    def uniform(n: int) -> "Distribution":
        return Distribution(np.full(n, 1.0 / n))


@dataclass(frozen=True, eq=False)
class Channel:
    """A discrete memoryless channel: an |X| x |Y| row-stochastic matrix.

    Row ``a`` is the conditional output distribution given input ``a``.
    """

    matrix: np.ndarray

    def __post_init__(self):
        w = _validated(self.matrix, "Channel")
        if w.ndim != 2:
            raise ValueError("Channel: expected a 2-d matrix")
        rowsums = w.sum(axis=1)
        bad = np.abs(rowsums - 1.0) > SUM_TOL
        if bad.any():
            a = int(np.argmax(bad))
            raise ValueError(f"Channel: row {a} sums to {rowsums[a]}, not 1")
        object.__setattr__(self, "matrix", w)

    @property
    def nx(self) -> int:
        return self.matrix.shape[0]

    @property
    def ny(self) -> int:
        return self.matrix.shape[1]

    @staticmethod
    def bsc(crossover: float) -> "Channel":
        """Binary symmetric channel with the given crossover probability."""
        if not 0.0 <= crossover <= 1.0:
            raise ValueError("crossover must lie in [0, 1]")
        q = crossover
        return Channel(np.array([[1.0 - q, q], [q, 1.0 - q]]))

    @staticmethod
    def identity(n: int) -> "Channel":
        return Channel(np.eye(n))

    @staticmethod
    def pure_noise(noise: Distribution, num_inputs: int) -> "Channel":
        """Channel whose output is independent of its input."""
        return Channel(np.tile(noise.probs, (num_inputs, 1)))

    def mix(self, other: "Channel", t: float) -> "Channel":
        """Convex combination (1-t) * self + t * other."""
        m = (1.0 - t) * self.matrix + t * other.matrix
        return Channel(m / m.sum(axis=1, keepdims=True))


@dataclass(frozen=True, eq=False)
class Joint:
    """A joint distribution on X x Y stored as an |X| x |Y| matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        m = _validated(self.matrix, "Joint")
        if m.ndim != 2:
            raise ValueError("Joint: expected a 2-d matrix")
        if abs(m.sum() - 1.0) > SUM_TOL:
            raise ValueError(f"Joint: entries sum to {m.sum()}, not 1")
        object.__setattr__(self, "matrix", m)

    @property
    def x_marginal(self) -> Distribution:
        return Distribution(self.matrix.sum(axis=1))

    @property
    def y_marginal(self) -> Distribution:
        return Distribution(self.matrix.sum(axis=0))

    @property
    def product(self) -> "Joint":
        """The independent coupling of the two marginals."""
        p = self.matrix.sum(axis=1)
        q = self.matrix.sum(axis=0)
        return Joint(np.outer(p, q))


def joint_of(input_dist: Distribution, channel: Channel) -> Joint:
    """Joint distribution with X-marginal ``input_dist`` and conditional ``channel``."""
    p = _values(input_dist)
    w = _values(channel)
    if p.shape[0] != w.shape[0]:
        raise ValueError(
            f"dimension mismatch: input has {p.shape[0]} symbols, channel has {w.shape[0]} rows"
        )
    return Joint(p[:, None] * w)


def decompose(mu: Joint) -> tuple[Distribution, Distribution, Joint]:
    """Return (X-marginal, Y-marginal, product of the marginals)."""
    return mu.x_marginal, mu.y_marginal, mu.product


def kl_divergence(p, q) -> float:
    """Kullback-Leibler divergence ``sum p log(p/q)`` in nats.

    Accepts matching-shape Distribution, Joint, Channel rows or raw arrays.
    Returns ``math.inf`` when ``p`` puts mass outside the support of ``q``;
    ``0 log(0/.)`` contributes zero.
    """
    a = _values(p)
    b = _values(q)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    on = a > SUPPORT_FLOOR
    if np.any(on & (b <= SUPPORT_FLOOR)):
        return math.inf
    a_on = np.where(on, a, 1.0)
    b_on = np.where(on, b, 1.0)
    return float(np.sum(np.where(on, a * (np.log(a_on) - np.log(b_on)), 0.0)))


def mutual_information(input_dist: Distribution, channel: Channel) -> float:
    """Mutual information I(X;Y) in nats for the given input and channel."""
    mu = joint_of(input_dist, channel)
    return kl_divergence(mu, mu.product)
