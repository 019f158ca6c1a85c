import math

import numpy as np
import pytest

from ccdec import (
    Channel,
    CompoundSet,
    DecoderSpec,
    Distribution,
    Metric,
    build_metrics,
    decode,
    estimate_error,
    generate_codebook,
    score_codewords,
    transmit,
)
from ccdec.simulate import Codebook, joint_type_counts, wilson_interval

UNIFORM = Distribution.uniform(2)


class TestGenerateCodebook:
    def test_point_mass_input_gives_constant_words(self):
        cb = generate_codebook(Distribution(np.array([1.0, 0.0])), 8, 4, seed=0)
        assert np.all(cb.words == 0)

    def test_seed_reproducibility(self):
        a = generate_codebook(UNIFORM, 16, 32, seed=9)
        b = generate_codebook(UNIFORM, 16, 32, seed=9)
        assert np.array_equal(a.words, b.words)
        c = generate_codebook(UNIFORM, 16, 32, seed=10)
        assert not np.array_equal(a.words, c.words)

    def test_symbol_frequencies_concentrate(self):
        p = Distribution(np.array([0.3, 0.7]))
        cb = generate_codebook(p, 1000, 100, seed=3)
        freq = (cb.words == 1).mean()
        sigma = math.sqrt(0.3 * 0.7 / cb.words.size)
        assert abs(freq - 0.7) <= 3 * sigma

    def test_size_validation(self):
        with pytest.raises(ValueError):
            generate_codebook(UNIFORM, 0, 4, seed=0)
        with pytest.raises(ValueError):
            generate_codebook(UNIFORM, 4, 1, seed=0)


class TestTransmit:
    def test_identity_channel_copies(self):
        x = np.array([0, 1, 1, 0, 1])
        assert np.array_equal(transmit(Channel.identity(2), x, seed=1), x)

    def test_bsc_zero_copies(self):
        x = np.array([0, 1, 0])
        assert np.array_equal(transmit(Channel.bsc(0.0), x, seed=5), x)

    def test_pure_noise_output_distribution(self):
        noise = Distribution(np.array([0.2, 0.8]))
        w = Channel.pure_noise(noise, 2)
        x = np.zeros(20000, dtype=int)
        y = transmit(w, x, seed=11)
        freq = (y == 1).mean()
        sigma = math.sqrt(0.2 * 0.8 / x.size)
        assert abs(freq - 0.8) <= 3 * sigma


class TestDecode:
    def test_single_codeword(self):
        cb = Codebook(np.array([[0, 1, 0]]))
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.1).matrix)))
        assert decode(np.array([1, 1, 0]), cb, spec, 2, 2) == 0

    def test_noiseless_matched_recovery(self):
        cb = generate_codebook(UNIFORM, 24, 16, seed=2)
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.05).matrix)))
        for m in range(16):
            y = transmit(Channel.identity(2), cb.words[m], seed=m)
            assert decode(y, cb, spec, 2, 2) == m

    def test_type_based_scores_match_symbolwise_sum(self, rng):
        cb = generate_codebook(UNIFORM, 40, 64, seed=4)
        y = rng.integers(0, 2, size=40)
        d = Metric(rng.normal(size=(2, 2)))
        scores = score_codewords(y, cb, DecoderSpec.linear(d), 2, 2)
        direct = d.values[cb.words, y[None, :]].mean(axis=1)
        assert np.abs(scores - direct).max() <= 1e-12

    def test_shift_invariance_of_decisions(self, rng):
        d = Metric(rng.normal(size=(2, 2)))
        f = rng.normal(size=2)
        spec0 = DecoderSpec.linear(d)
        spec1 = DecoderSpec.linear(d.shifted(f))
        cb = generate_codebook(UNIFORM, 32, 64, seed=6)
        for t in range(1000):
            y = np.random.default_rng(t).integers(0, 2, size=32)
            assert decode(y, cb, spec0, 2, 2) == decode(y, cb, spec1, 2, 2)

    def test_ml_map_identical_decisions(self, rng):
        w = Channel.bsc(0.12)
        (ml,) = build_metrics("ml", [w], UNIFORM)
        (mp,) = build_metrics("map", [w], UNIFORM)
        cb = generate_codebook(UNIFORM, 32, 64, seed=8)
        for t in range(1000):
            y = np.random.default_rng(1000 + t).integers(0, 2, size=32)
            assert decode(y, cb, DecoderSpec.linear(ml), 2, 2) == decode(
                y, cb, DecoderSpec.linear(mp), 2, 2
            )

    def test_generalized_with_one_metric_is_linear(self, rng):
        d = Metric(rng.normal(size=(2, 2)))
        cb = generate_codebook(UNIFORM, 24, 32, seed=12)
        for t in range(200):
            y = np.random.default_rng(2000 + t).integers(0, 2, size=24)
            lin = decode(y, cb, DecoderSpec.linear(d), 2, 2)
            gen = decode(y, cb, DecoderSpec.generalized([d]), 2, 2)
            assert lin == gen

    def test_generalized_uniform_shift_invariance(self, rng):
        ds = [Metric(rng.normal(size=(2, 2))) for _ in range(3)]
        f = rng.normal(size=2)
        cb = generate_codebook(UNIFORM, 24, 32, seed=13)
        spec0 = DecoderSpec.generalized(ds)
        spec1 = DecoderSpec.generalized([d.shifted(f) for d in ds])
        for t in range(200):
            y = np.random.default_rng(3000 + t).integers(0, 2, size=24)
            assert decode(y, cb, spec0, 2, 2) == decode(y, cb, spec1, 2, 2)

    def test_mmi_score_is_type_mutual_information(self):
        cb = Codebook(np.array([[0, 0, 1, 1], [0, 1, 0, 1]]))
        y = np.array([0, 0, 1, 1])
        scores = score_codewords(y, cb, DecoderSpec.mmi(), 2, 2)
        assert scores[0] == pytest.approx(math.log(2), abs=1e-12)  # perfect correlation
        assert scores[1] == pytest.approx(0.0, abs=1e-12)  # independent type


class TestJointTypes:
    def test_counts_sum_to_block_length(self, rng):
        cb = generate_codebook(UNIFORM, 17, 5, seed=3)
        y = rng.integers(0, 2, size=17)
        counts = joint_type_counts(cb.words, y, 2, 2)
        assert counts.shape == (5, 2, 2)
        assert np.all(counts.sum(axis=(1, 2)) == 17)


class TestWilson:
    def test_interval_contains_point_estimate(self):
        lo, hi = wilson_interval(10, 100)
        assert lo < 0.1 < hi

    def test_zero_errors(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0
        assert hi < 0.1


class TestEstimateError:
    def test_noiseless_sanity(self):
        cset = CompoundSet((Channel.bsc(0.001),))
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.001).matrix)))
        stats = estimate_error(cset, spec, UNIFORM, 24, 0.1, 100, seed=5)
        assert stats[0].errors <= 1

    def test_determinism(self):
        cset = CompoundSet((Channel.bsc(0.05),))
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.05).matrix)))
        a = estimate_error(cset, spec, UNIFORM, 16, 0.25, 50, seed=7)
        b = estimate_error(cset, spec, UNIFORM, 16, 0.25, 50, seed=7)
        assert a == b

    def test_codeword_cap_enforced(self):
        cset = CompoundSet((Channel.bsc(0.05),))
        spec = DecoderSpec.mmi()
        with pytest.raises(ValueError):
            estimate_error(cset, spec, UNIFORM, 64, 0.4, 10, seed=1)

    def test_ensemble_handles_huge_codebooks(self):
        cset = CompoundSet((Channel.bsc(0.05),))
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.05).matrix)))
        stats = estimate_error(
            cset, spec, UNIFORM, 64, 1.1, 20, seed=1, method="ensemble"
        )
        assert stats[0].num_codewords > 2**64
        assert stats[0].mean_error_prob > 0.5  # far above capacity

    def test_ensemble_matches_codebook_estimate(self):
        # same estimand: fresh-codebook ensemble average error
        cset = CompoundSet((Channel.bsc(0.08),))
        metrics = build_metrics("map", [Channel.bsc(0.08)], UNIFORM)
        spec = DecoderSpec.generalized(metrics)
        cb = estimate_error(cset, spec, UNIFORM, 16, 0.35, 3000, seed=21)[0]
        en = estimate_error(cset, spec, UNIFORM, 16, 0.35, 3000, seed=22, method="ensemble")[0]
        sigma = math.sqrt(cb.error_rate * (1 - cb.error_rate) / cb.trials)
        assert abs(en.mean_error_prob - cb.error_rate) <= 4 * sigma + 0.01

    def test_fixed_codebook_mode(self):
        cset = CompoundSet((Channel.bsc(0.05),))
        spec = DecoderSpec.linear(Metric(np.log(Channel.bsc(0.05).matrix)))
        stats = estimate_error(
            cset, spec, UNIFORM, 16, 0.25, 50, seed=7, fresh_codebook=False
        )
        assert stats[0].trials == 50

    def test_mmi_close_to_gmap_on_matched_runs(self):
        # the empirical-information decoder needs no channel knowledge yet
        # should not lose to the matched generalized family beyond noise
        # (blocklength long enough that type granularity stops mattering)
        cset = CompoundSet((Channel.bsc(0.05), Channel.bsc(0.95)), ((0,), (1,)))
        metrics = build_metrics("map", [Channel.bsc(0.05), Channel.bsc(0.95)], UNIFORM)
        gmap = estimate_error(
            cset, DecoderSpec.generalized(metrics), UNIFORM, 32, 0.3, 1500, seed=31
        )
        mmi = estimate_error(cset, DecoderSpec.mmi(), UNIFORM, 32, 0.3, 1500, seed=31)
        for g, m in zip(gmap, mmi):
            sigma = math.sqrt(max(g.error_rate * (1 - g.error_rate), 1e-4) / g.trials)
            assert m.error_rate <= g.error_rate + 3 * sigma

    def test_rate_must_be_positive(self):
        cset = CompoundSet((Channel.bsc(0.05),))
        with pytest.raises(ValueError):
            estimate_error(cset, DecoderSpec.mmi(), UNIFORM, 16, 0.0, 10, seed=1)

    def test_glrt_loses_to_gmap_on_embedded_mismatch_example(self):
        # the member whose centered direction opposes the other block's
        # metric keeps a constant-order error under the likelihood family
        from ccdec import Direction, embed

        noise = Distribution(np.array([0.5, 0.5]))
        dirs = [
            Direction(np.array(v), noise)
            for v in ([[-2.0, 2.0], [-7.0, 7.0]], [[2.0, -2.0], [0.0, 0.0]], [[-1.0, 1.0], [1.0, -1.0]])
        ]
        w = [embed(d, 0.05) for d in dirs]
        truth = CompoundSet((w[0],))
        worsts = [w[1], w[2]]
        trials = 1500
        glrt = estimate_error(
            truth, DecoderSpec.generalized(build_metrics("ml", worsts, UNIFORM)),
            UNIFORM, 64, 0.008, trials, seed=7, method="ensemble",
        )[0]
        gmap = estimate_error(
            truth, DecoderSpec.generalized(build_metrics("map", worsts, UNIFORM)),
            UNIFORM, 64, 0.008, trials, seed=7, method="ensemble",
        )[0]
        sigma = math.sqrt(glrt.error_rate * (1 - glrt.error_rate) / trials) + math.sqrt(
            gmap.error_rate * (1 - gmap.error_rate) / trials
        )
        assert glrt.error_rate >= gmap.error_rate + 3 * sigma
