import itertools
import math

import numpy as np
import pytest

from stcsim import codes
from stcsim.channel import SnrPoint, equivalent_channel, sample_channel
from stcsim.codes import Constellation
from stcsim.decoders import (DecodeError, DecoderConfig, ProfileMismatchError,
                             complexity_simplified_estimate,
                             complexity_traditional, decode_ml,
                             decode_simplified, decode_traditional,
                             reduction_bound, structural_zeroed_r)
from stcsim.structure import BlockProfile, classify_code


def reference_complexity(l, m, mc, t):
    """Independent term-by-term evaluation of the stage-count sum with
    explicit Iverson brackets.  The final stage is always billed (the
    decision needs its metrics), which pins the exhaustive-search anchor."""
    total = 0
    for stage_l in range(l, 0, -1):
        depth = l - stage_l          # stages already decoded
        expanded = m ** (depth + 1)
        gate = 1 if (mc < expanded or stage_l == 1) else 0
        if mc > m ** depth:
            parents = m ** depth
        else:
            parents = mc
        total += gate * m * parents
    return total / t


def brute_force_ml(h, y, rho, constellation, l):
    """Loop-based exhaustive decoder, independent of the library path."""
    g = math.sqrt(rho) * h
    best, best_s = math.inf, None
    for combo in itertools.product(range(constellation.m), repeat=l):
        # combo[0] is the index of the last symbol: same tie order as decode_ml
        s = constellation.levels[list(combo[::-1])]
        metric = float(np.sum((y - g @ s) ** 2))
        if metric < best:
            best, best_s = metric, s
    return best_s


def random_instance(code, nr, constellation, snr_db, gen):
    ch = sample_channel(code.nt, nr, gen)
    idx = gen.integers(0, constellation.m, size=code.l)
    s = constellation.levels[idx]
    h = equivalent_channel(code, ch)
    rho = SnrPoint(snr_db).rho
    y = math.sqrt(rho) * (h @ s) + gen.normal(0, math.sqrt(0.5), size=h.shape[0])
    return h, y, rho, idx


class TestComplexityTraditional:
    def test_sic_anchor(self):
        assert complexity_traditional(8, 4, 1, 2) == 16.0

    def test_exhaustive_anchor(self):
        assert complexity_traditional(8, 4, 4 ** 8, 2) == 4 ** 8 / 2
        assert complexity_traditional(4, 2, 16, 1) == 16.0

    def test_fixed_point(self):
        # independently summed before implementation: 64 + 5*80 over T=2
        assert complexity_traditional(8, 4, 20, 2) == 232.0

    def test_against_reference_on_random_tuples(self, rng):
        for _ in range(100):
            l = int(rng.integers(1, 13))
            m = int(rng.choice([2, 4, 8]))
            mc = int(rng.integers(1, 257))
            t = int(rng.integers(1, 5))
            assert complexity_traditional(l, m, mc, t) == \
                reference_complexity(l, m, mc, t), (l, m, mc, t)

    def test_fast_decoding_regime(self):
        # mc = M^(L-k) exposes k counted stages of M*mc each
        l, m, k, t = 6, 2, 2, 1
        mc = m ** (l - k)
        assert complexity_traditional(l, m, mc, t) == k * m * mc / t

    def test_bad_args(self):
        with pytest.raises(DecodeError):
            complexity_traditional(0, 4, 1, 1)


class TestDecodeMl:
    def test_noiseless_recovery(self, rng):
        code = codes.alamouti()
        const = Constellation.pam(4)
        ch = sample_channel(2, 1, rng)
        idx = rng.integers(0, 4, size=4)
        h = equivalent_channel(code, ch)
        rho = SnrPoint(6.0).rho
        y = math.sqrt(rho) * (h @ const.levels[idx])
        np.testing.assert_array_equal(decode_ml(h, y, rho, const),
                                      const.levels[idx])

    def test_tiny_enumeration_identity(self, rng):
        const = Constellation.pam(2)
        h = rng.normal(size=(3, 2))
        y = rng.normal(size=3)
        rho = 2.0
        got = decode_ml(h, y, rho, const)
        cands = [const.levels[[a, b]] for a in range(2) for b in range(2)]
        best = min(cands, key=lambda s: float(np.sum((y - math.sqrt(rho) * h @ s) ** 2)))
        np.testing.assert_array_equal(got, best)

    def test_matches_independent_brute_force(self, rng):
        const = Constellation.pam(4)
        code = codes.alamouti()
        for _ in range(25):
            h, y, rho, _ = random_instance(code, 1, const, 8.0, rng)
            np.testing.assert_array_equal(
                decode_ml(h, y, rho, const),
                brute_force_ml(h, y, rho, const, 4))

    def test_search_space_guard(self):
        const = Constellation.pam(16)
        with pytest.raises(DecodeError):
            decode_ml(np.eye(8), np.zeros(8), 1.0, const, l=8)

    def test_chunking_irrelevant(self, rng):
        const = Constellation.pam(4)
        h, y, rho, _ = random_instance(codes.alamouti(), 1, const, 8.0, rng)
        a = decode_ml(h, y, rho, const, chunk=7)
        b = decode_ml(h, y, rho, const, chunk=1 << 16)
        np.testing.assert_array_equal(a, b)


class TestDecodeTraditional:
    def test_noiseless_any_budget(self, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        ch = sample_channel(4, 2, rng)
        idx = rng.integers(0, 4, size=8)
        h = equivalent_channel(code, ch)
        rho = SnrPoint(10.0).rho
        y = math.sqrt(rho) * (h @ const.levels[idx])
        for mc in (1, 3, 16):
            out = decode_traditional(h, y, rho, DecoderConfig(mc, const))
            np.testing.assert_array_equal(out.indices, idx)

    def test_sic_count(self, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        h, y, rho, _ = random_instance(code, 2, const, 10.0, rng)
        out = decode_traditional(h, y, rho, DecoderConfig(1, const))
        assert out.metric_evals == 8 * 4  # L*M total, i.e. LM/T per duration

    def test_counter_equals_formula(self, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        for mc in (1, 5, 16, 64, 300):
            h, y, rho, _ = random_instance(code, 2, const, 10.0, rng)
            out = decode_traditional(h, y, rho, DecoderConfig(mc, const))
            assert out.metric_evals == complexity_traditional(8, 4, mc, 2) * 2

    def test_ml_limit_matches_exhaustive(self, rng):
        const4 = Constellation.pam(4)
        const2 = Constellation.pam(2)
        cases = [(codes.alamouti(), 1, const4, 4 ** 3, 250),
                 (codes.blast(2), 2, const4, 4 ** 3, 250),
                 (codes.dsttd(), 2, const2, 2 ** 7, 200)]
        for code, nr, const, mc, n in cases:
            for _ in range(n):
                h, y, rho, _ = random_instance(code, nr, const, 9.0, rng)
                out = decode_traditional(h, y, rho, DecoderConfig(mc, const))
                ml = decode_ml(h, y, rho, const)
                np.testing.assert_array_equal(out.symbols, ml)

    def test_metric_is_true_distance(self, rng):
        code = codes.alamouti()
        const = Constellation.pam(4)
        h, y, rho, _ = random_instance(code, 1, const, 8.0, rng)
        out = decode_traditional(h, y, rho, DecoderConfig(64, const))
        resid = y - math.sqrt(rho) * h @ out.symbols
        # tree metric excludes the component of y outside the column space
        q, _ = np.linalg.qr(math.sqrt(rho) * h)
        inside = q.T @ y
        assert out.metric == pytest.approx(float(np.sum(resid ** 2))
                                           - float(y @ y - inside @ inside),
                                           abs=1e-9)


@pytest.fixture(scope="module")
def dsttd_profile():
    return classify_code(codes.dsttd(), seed=0).profile


class TestDecodeSimplified:
    def test_requires_profile(self, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        h, y, rho, _ = random_instance(code, 2, const, 10.0, rng)
        with pytest.raises(DecodeError):
            decode_simplified(h, y, rho, DecoderConfig(8, const))

    def test_identical_decisions_and_survivors(self, dsttd_profile, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        for mc in (4, 16, 64):
            cfg = DecoderConfig(mc, const, dsttd_profile)
            for _ in range(150):
                h, y, rho, _ = random_instance(code, 2, const, 12.0, rng)
                a = decode_traditional(h, y, rho, cfg, record_survivors=True)
                b = decode_simplified(h, y, rho, cfg, record_survivors=True)
                np.testing.assert_array_equal(a.indices, b.indices)
                assert a.metric == b.metric
                assert len(a.survivor_paths) == len(b.survivor_paths)
                for pa, pb in zip(a.survivor_paths, b.survivor_paths):
                    np.testing.assert_array_equal(pa, pb)
                assert b.metric_evals <= a.metric_evals

    def test_trivial_profile_gives_equal_counts(self, rng):
        """One-unit-per-block structure allows no sharing at all."""
        code = codes.golden()
        const = Constellation.pam(4)
        trivial = BlockProfile(n_blocks=8, units_per_block=1, unit_size=1)
        cfg = DecoderConfig(16, const, trivial)
        for _ in range(20):
            h, y, rho, _ = random_instance(code, 2, const, 12.0, rng)
            a = decode_traditional(h, y, rho, cfg)
            b = decode_simplified(h, y, rho, cfg)
            assert a.metric_evals == b.metric_evals
            np.testing.assert_array_equal(a.indices, b.indices)

    def test_mceq_chain_monotone(self, dsttd_profile, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        cfg = DecoderConfig(20, const, dsttd_profile)
        for _ in range(200):
            h, y, rho, _ = random_instance(code, 2, const, 12.0, rng)
            out = decode_simplified(h, y, rho, cfg)
            chain = out.mceq_per_stage[4:]     # second decoded block
            assert chain[0] == min(20, 4 ** 4, 20)
            assert all(a >= b for a, b in zip(chain, chain[1:]))
            assert all(v <= 20 for v in out.mceq_per_stage)

    def test_block_ratio_respects_bound(self, dsttd_profile, rng):
        """Within the non-first block, the shared/plain evaluation ratio never
        drops below the closed-form floor (budgets where the floor is
        attainable only from above)."""
        code = codes.dsttd()
        const = Constellation.pam(4)
        bound = reduction_bound(4, 4, 1)
        for mc in (8, 16, 32):
            cfg = DecoderConfig(mc, const, dsttd_profile)
            for _ in range(100):
                h, y, rho, _ = random_instance(code, 2, const, 12.0, rng)
                out = decode_simplified(h, y, rho, cfg)
                shared = sum(4 * min(v, mc) for v in out.mceq_per_stage[4:])
                plain = sum(4 * mc for _ in range(4))
                assert shared / plain >= bound - 1e-12

    def test_mismatched_profile_rejected(self, rng):
        gen = np.random.default_rng(5)
        mats = gen.normal(size=(8, 2, 4)) + 1j * gen.normal(size=(8, 2, 4))
        from stcsim.codes import DispersionCode

        dense = DispersionCode.from_matrices("dense", mats)
        const = Constellation.pam(4)
        h, y, rho, _ = random_instance(dense, 2, const, 10.0, rng)
        bad_profile = BlockProfile(2, 4, 1)
        with pytest.raises(ProfileMismatchError):
            decode_simplified(h, y, rho, DecoderConfig(8, const, bad_profile))

    def test_unit_size_two(self, rng):
        """gamma > 1 units decode as super-symbols; decisions still match."""
        from stcsim.constructions import scalable_code

        code = scalable_code(2, 1)
        profile = classify_code(code, seed=0).profile
        assert profile.as_tuple() == (4, 4, 2)
        const = Constellation.pam(2)
        cfg = DecoderConfig(16, const, profile)
        for _ in range(10):
            h, y, rho, _ = random_instance(code, 4, const, 14.0, rng)
            a = decode_traditional(h, y, rho, cfg, record_survivors=True)
            b = decode_simplified(h, y, rho, cfg, record_survivors=True)
            np.testing.assert_array_equal(a.indices, b.indices)
            for pa, pb in zip(a.survivor_paths, b.survivor_paths):
                np.testing.assert_array_equal(pa, pb)
            assert b.metric_evals <= a.metric_evals
            # unit-adjusted counter: 16 stages of alphabet 4
            assert a.metric_evals == complexity_traditional(16, 4, 16, 4) * 4


class TestSimplifiedEstimate:
    def test_saturated_traces_equal_traditional(self):
        l, m, mc, t = 8, 4, 16, 2
        traces = [[mc] * l for _ in range(5)]
        assert complexity_simplified_estimate(traces, l, m, mc, t) == \
            complexity_traditional(l, m, mc, t)

    def test_matches_decoder_counter(self, dsttd_profile, rng):
        code = codes.dsttd()
        const = Constellation.pam(4)
        mc = 16
        cfg = DecoderConfig(mc, const, dsttd_profile)
        traces, counted = [], []
        for _ in range(50):
            h, y, rho, _ = random_instance(code, 2, const, 12.0, rng)
            out = decode_simplified(h, y, rho, cfg)
            traces.append(out.mceq_per_stage)
            counted.append(out.metric_evals / code.t)
        est = complexity_simplified_estimate(traces, 8, 4, mc, 2)
        assert est == pytest.approx(np.mean(counted), rel=1e-12)

    def test_empty_traces(self):
        with pytest.raises(DecodeError):
            complexity_simplified_estimate([], 8, 4, 16, 2)


class TestReductionBound:
    def test_values(self):
        assert reduction_bound(4, 4, 1) == pytest.approx(1 / 3)
        assert reduction_bound(2, 4, 2) == pytest.approx(16 / 30)
        assert reduction_bound(4, 16, 1) == pytest.approx(16 / 60)

    def test_single_unit_clamps_to_one(self):
        assert reduction_bound(1, 4, 1) == 1.0
        assert reduction_bound(1, 16, 3) == 1.0


class TestStructuralZeroing:
    def test_zeroes_only_forbidden(self, rng):
        code = codes.dsttd()
        profile = classify_code(code, seed=0).profile
        ch = sample_channel(4, 2, rng)
        h = equivalent_channel(code, ch)
        from stcsim.structure import qr_decompose

        _, r = qr_decompose(h)
        z = structural_zeroed_r(r, profile)
        assert np.all(z[:4, :4] == np.diag(np.diag(z[:4, :4])))
        np.testing.assert_array_equal(z[:4, 4:], r[:4, 4:])

    def test_rejects_dense_r(self, rng):
        r = np.triu(rng.normal(size=(8, 8)) + 3 * np.eye(8))
        with pytest.raises(ProfileMismatchError):
            structural_zeroed_r(r, BlockProfile(2, 4, 1))
