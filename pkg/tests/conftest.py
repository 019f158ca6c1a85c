import math

import numpy as np
import pytest

from ccdec import Channel, Distribution


def binary_entropy_bits(q: float) -> float:
    """Closed-form binary entropy in bits; the oracle for BSC quantities."""
    if q in (0.0, 1.0):
        return 0.0
    return -(q * math.log2(q) + (1 - q) * math.log2(1 - q))


def bsc_capacity_nats(q: float) -> float:
    return (1.0 - binary_entropy_bits(q)) * math.log(2.0)


def random_distribution(rng, n, floor=0.05):
    p = rng.uniform(floor, 1.0, size=n)
    return Distribution(p / p.sum())


def random_channel(rng, nx, ny, floor=0.05):
    m = rng.uniform(floor, 1.0, size=(nx, ny))
    return Channel(m / m.sum(axis=1, keepdims=True))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
