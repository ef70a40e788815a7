import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ndtr

from mhminibatch.stats import (
    LOGISTIC_VARIANCE,
    MomentAccumulator,
    barker,
    clt_error_bound,
    ks_distance,
    logistic_cdf,
    logistic_gaussian_gap,
    logit,
    sample_logistic,
)


class TestBarker:
    def test_examples(self):
        assert barker(0.0) == 0.5
        assert barker(math.log(3)) == pytest.approx(0.75, abs=1e-15)
        assert barker(-math.log(3)) == pytest.approx(0.25, abs=1e-15)

    def test_saturates_without_overflow(self):
        with np.errstate(over="raise"):
            assert barker(701.0) == 1.0
            assert barker(-701.0) == 0.0
            assert 0.0 < barker(-699.0) < 1e-300

    def test_nan_propagates(self):
        assert math.isnan(barker(float("nan")))

    def test_monotone(self):
        s = np.linspace(-50, 50, 10001)
        assert np.all(np.diff(barker(s)) >= 0)

    def test_detailed_balance_identity(self):
        s = np.linspace(-30, 30, 1000)
        rhs = np.exp(s) * barker(-s)
        assert np.all(np.abs(barker(s) - rhs) <= 1e-12 * np.maximum(1.0, rhs))

    def test_complement(self):
        s = np.linspace(-30, 30, 1001)
        np.testing.assert_allclose(barker(s) + barker(-s), 1.0, rtol=0, atol=1e-15)

    def test_logistic_close_to_scaled_normal(self):
        assert logistic_gaussian_gap(1.7) < 0.01


class TestLogistic:
    def test_inverse_examples(self):
        assert logit(0.5) == 0.0
        assert logit(0.75) == pytest.approx(math.log(3), abs=1e-15)

    def test_moments(self):
        rng = np.random.default_rng(1)
        x = sample_logistic(rng, 10 ** 6)
        assert abs(x.mean()) < 0.006
        assert abs(x.var() - LOGISTIC_VARIANCE) < 0.05

    def test_scalar_draw(self):
        x = sample_logistic(np.random.default_rng(0))
        assert isinstance(x, float) and math.isfinite(x)


class TestMomentAccumulator:
    def test_hand_example(self):
        acc = MomentAccumulator()
        for x in (1, 2, 3):
            acc.push(x)
        assert acc.mean == 2.0
        assert acc.sem2 == pytest.approx(2.0 / 9.0, rel=1e-14)
        assert acc.variance == pytest.approx(2.0 / 3.0, rel=1e-14)
        m1, m3 = acc.standardized_moments()
        assert m1 == pytest.approx(2.0 / 3.0 * math.sqrt(1.5), rel=1e-12)
        assert m3 == pytest.approx(2.0 / 3.0 * 1.5 ** 1.5, rel=1e-12)

    def test_degenerate(self):
        acc = MomentAccumulator([4.2, 4.2, 4.2])
        assert acc.sem2 == 0.0
        assert acc.degenerate
        assert acc.standardized_moments() == (0.0, 0.0)

    def test_push_and_extend_agree(self):
        x = np.random.default_rng(3).normal(5.0, 2.0, 777)
        a = MomentAccumulator()
        for v in x:
            a.push(v)
        b = MomentAccumulator()
        for chunk in np.array_split(x, 7):
            b.extend(chunk)
        assert a.count == b.count == 777
        assert a.mean == pytest.approx(b.mean, rel=1e-12)
        assert a.sem2 == pytest.approx(b.sem2, rel=1e-10)

    @pytest.mark.parametrize("n", [2, 17, 1000, 100_000])
    def test_matches_two_pass(self, n):
        rng = np.random.default_rng(n)
        x = rng.standard_t(4, n) * 30 + 1e3
        acc = MomentAccumulator()
        for chunk in np.array_split(x, 13):
            acc.extend(chunk)
        mu = x.mean()
        dev = x - mu
        s = math.sqrt(np.mean(dev ** 2))
        assert acc.mean == pytest.approx(mu, rel=1e-10)
        assert acc.sem2 == pytest.approx(np.sum(dev ** 2) / n ** 2, rel=1e-9)
        m1, m3 = acc.standardized_moments()
        assert m1 == pytest.approx(np.mean(np.abs(dev)) / s, rel=1e-9)
        assert m3 == pytest.approx(np.mean(np.abs(dev) ** 3) / s ** 3, rel=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=200),
        st.floats(1e-3, 1e3).flatmap(lambda c: st.sampled_from([c, -c])),
    )
    def test_moments_scale_invariant(self, xs, c):
        x = np.array(xs)
        if np.ptp(x) < 1e-6 * max(1.0, np.max(np.abs(x))):
            return
        a = MomentAccumulator(x).standardized_moments()
        b = MomentAccumulator(c * x).standardized_moments()
        np.testing.assert_allclose(a, b, rtol=1e-9)

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=100))
    def test_positive_moments_unless_constant(self, xs):
        acc = MomentAccumulator(xs)
        assert acc.sem2 >= 0
        m1, m3 = acc.standardized_moments()
        if acc.degenerate:
            assert (m1, m3) == (0.0, 0.0)
        else:
            assert m1 > 0 and m3 > 0


class TestCltBound:
    def test_examples(self):
        # inputs are rounded to four places, so the quoted value agrees to ~1e-5
        assert clt_error_bound(0.8165, 1.2247, 100) == pytest.approx(0.947108, abs=1e-12)
        assert clt_error_bound(0.8165, 1.2247, 100) == pytest.approx(0.94712, abs=5e-5)
        r = math.sqrt(2 / math.pi)
        assert clt_error_bound(r, 2 * r, 10_000) == pytest.approx(0.11809, abs=1e-5)

    def test_sqrt_scaling(self):
        assert clt_error_bound(0.7, 1.9, 400) == pytest.approx(clt_error_bound(0.7, 1.9, 100) / 2)

    def test_insufficient_batch(self):
        with pytest.raises(ValueError, match="insufficient batch"):
            clt_error_bound(1.0, 1.0, 1)


class TestKsDistance:
    def test_single_point(self):
        assert ks_distance([0.0], logistic_cdf) == 0.5

    def test_quantile_construction(self):
        n = 200
        q = logit((np.arange(1, n + 1) - 0.5) / n)
        assert ks_distance(q, logistic_cdf) == pytest.approx(0.5 / n, rel=1e-9)

    def test_large_sample(self):
        x = sample_logistic(np.random.default_rng(11), 10 ** 6)
        assert ks_distance(x, logistic_cdf) < 0.002

    def test_detects_wrong_reference(self):
        x = sample_logistic(np.random.default_rng(12), 10 ** 5)
        assert ks_distance(x, ndtr) > 0.05

    def test_empty(self):
        with pytest.raises(ValueError):
            ks_distance([], logistic_cdf)
