import numpy as np
import pytest

from ccdec import (
    Channel,
    CompoundSet,
    Distribution,
    Metric,
    build_metrics,
    is_one_sided,
    joint_of,
    kl_divergence,
    mismatched_rate,
    mutual_information,
    one_sided_cover,
    worst_channel,
)
from ccdec.vn import Direction, embed
from conftest import random_channel, random_distribution

UNIFORM = Distribution.uniform(2)


def segment_toward_noise(rng, nx, ny, samples, t_hi=0.9):
    """A finite sample of channels on the segment from a random channel to pure noise.

    Mutual information is convex along the segment and zero at the noise end,
    hence nonincreasing in t; the largest sampled t is the exact worst channel
    of the sampled hull, which makes the sample one-sided at any input.
    """
    a = random_channel(rng, nx, ny)
    noise = Channel.pure_noise(Distribution(rng.dirichlet(np.ones(ny) * 5.0)), nx)
    ts = np.sort(rng.uniform(0.05, t_hi, size=samples))
    return CompoundSet(tuple(a.mix(noise, float(t)) for t in ts))


class TestIsOneSided:
    def test_singleton(self):
        assert is_one_sided(CompoundSet((Channel.bsc(0.12),)), UNIFORM)

    def test_convex_hull_samples(self, rng):
        # samples from the segment between BSC(0.1) and BSC(0.2): the hull's
        # worst channel is the 0.2 endpoint and it is in the sample
        ts = np.concatenate([[0.0, 1.0], rng.uniform(0, 1, size=18)])
        channels = tuple(Channel.bsc(0.1).mix(Channel.bsc(0.2), float(t)) for t in ts)
        verdict = is_one_sided(CompoundSet(channels), UNIFORM)
        assert verdict.one_sided
        assert verdict.worst_index == 1  # the BSC(0.2) endpoint

    def test_mirrored_pair_fails_on_tie(self):
        verdict = is_one_sided(
            CompoundSet((Channel.bsc(0.25), Channel.bsc(0.75))), UNIFORM
        )
        assert not verdict.one_sided
        assert "not unique" in verdict.reason

    def test_asymmetric_mirror_fails_without_tie(self):
        verdict = is_one_sided(
            CompoundSet((Channel.bsc(0.25), Channel.bsc(0.7))), UNIFORM
        )
        assert not verdict.one_sided
        assert verdict.witness == 0
        assert verdict.worst_index == 1

    def test_divergence_split_matches_arithmetic(self, rng):
        # recompute the three divergences by hand for one random pair
        p = random_distribution(rng, 2)
        cset = segment_toward_noise(rng, 2, 3, 4)
        verdict = is_one_sided(cset, p)
        worst = worst_channel(cset, p)
        mu_s = joint_of(p, worst.channel)
        for k, w in enumerate(cset.channels):
            mu0 = joint_of(p, w)
            margin = (
                kl_divergence(mu0, mu_s.product)
                - kl_divergence(mu0, mu_s)
                - kl_divergence(mu_s, mu_s.product)
            )
            assert verdict.margins[k] == pytest.approx(margin, abs=1e-12)

    def test_noise_segments_always_pass(self, rng):
        for _ in range(10):
            nx = int(rng.integers(2, 4))
            ny = int(rng.integers(2, 4))
            cset = segment_toward_noise(rng, nx, ny, int(rng.integers(3, 8)))
            p = random_distribution(rng, nx)
            assert is_one_sided(cset, p)


class TestWorstChannelLinearDecoder:
    def test_one_sided_implies_worst_metric_covers_capacity(self, rng):
        # scoring with the worst channel's likelihoods achieves at least the
        # set's minimum information for every member of a one-sided set
        for _ in range(5):
            cset = segment_toward_noise(rng, 2, 2, 4, t_hi=0.7)
            p = random_distribution(rng, 2)
            verdict = is_one_sided(cset, p)
            assert verdict.one_sided
            worst = worst_channel(cset, p)
            cap = mutual_information(p, worst.channel)
            (metric,) = build_metrics("ml", [worst.channel], p)
            for w in cset.channels:
                assert mismatched_rate(p, w, metric) >= cap - 1e-6


class TestPythagoreanSplit:
    def test_convex_family_inequality(self, rng):
        # members of a sampled segment against the segment's own worst point
        for _ in range(5):
            cset = segment_toward_noise(rng, 2, 3, 6)
            p = random_distribution(rng, 2)
            worst = worst_channel(cset, p)
            mu_s = joint_of(p, worst.channel)
            cap_term = kl_divergence(mu_s, mu_s.product)
            for w in cset.channels:
                mu0 = joint_of(p, w)
                lhs = kl_divergence(mu0, mu_s.product)
                rhs = kl_divergence(mu0, mu_s) + cap_term
                assert lhs >= rhs - 1e-9


class TestCover:
    def test_already_one_sided_single_block(self, rng):
        cset = segment_toward_noise(rng, 2, 2, 5)
        cover = one_sided_cover(cset, UNIFORM)
        assert cover == (tuple(range(5)),)

    def test_mirrored_pair_splits(self):
        cover = one_sided_cover(
            CompoundSet((Channel.bsc(0.25), Channel.bsc(0.75))), UNIFORM
        )
        assert cover == ((0,), (1,))

    def test_embedded_triple_cover(self):
        noise = Distribution(np.array([0.5, 0.5]))
        dirs = [
            Direction(np.array(v), noise)
            for v in (
                [[-2.0, 2.0], [-7.0, 7.0]],
                [[2.0, -2.0], [0.0, 0.0]],
                [[-1.0, 1.0], [1.0, -1.0]],
            )
        ]
        cset = CompoundSet(tuple(embed(d, 0.05) for d in dirs))
        cover = one_sided_cover(cset, UNIFORM)
        assert sorted(sorted(b) for b in cover) == [[0, 1], [2]]

    def test_every_block_verifies(self, rng):
        channels = tuple(random_channel(rng, 2, 2) for _ in range(6))
        cset = CompoundSet(channels)
        cover = one_sided_cover(cset, UNIFORM)
        assert sorted(i for blk in cover for i in blk) == list(range(6))
        for blk in cover:
            if len(blk) > 1:
                assert is_one_sided(cset.restrict(blk), UNIFORM)
