import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.special import binom

from logmatrix import series
from logmatrix.factor import coeffs_f1, coeffs_f2_base
from logmatrix.series import (
    MulBudget,
    NonInvertibleSeriesError,
    NormalizationError,
    antiderivative,
    convolve,
    derivative,
    divide,
    exp_series,
    log_series,
    pow_series,
    reciprocal,
)

from conftest import decaying_series


def naive_product(a, b, n):
    out = np.zeros(n)
    for i, ai in enumerate(a[:n]):
        for j, bj in enumerate(b[: n - i]):
            out[i + j] += ai * bj
    return out


class TestConvolve:
    def test_ones(self):
        np.testing.assert_array_equal(convolve([1, 1, 1], [1, 1, 1], 3), [1, 2, 3])

    def test_identity(self, rng):
        b = rng.normal(size=50)
        np.testing.assert_allclose(convolve([1.0], b, 50), b, atol=1e-14)

    def test_f1_squared_is_geometric(self):
        a = coeffs_f1(3)
        np.testing.assert_allclose(convolve(a, a, 3), [1, 1, 1], atol=1e-15)

    def test_zero_length_rejected(self):
        with pytest.raises(ValueError):
            convolve([1.0], [1.0], 0)

    @pytest.mark.parametrize("n", [5, 33, 100, 257])
    def test_matches_direct_sum(self, rng, n):
        a, b = rng.normal(size=n), rng.normal(size=n // 2 + 1)
        np.testing.assert_allclose(convolve(a, b, n), naive_product(a, b, n), atol=1e-11)

    def test_result_padded_when_short(self):
        np.testing.assert_array_equal(convolve([1.0], [2.0], 4), [2, 0, 0, 0])

    def test_charges_one_unit_per_term(self, rng):
        n = 1024
        with MulBudget() as b:
            convolve(rng.normal(size=n), rng.normal(size=n), n)
        assert b.units(n) == pytest.approx(1.0)

    @given(st.integers(1, 300), st.integers(0, 2**32 - 1))
    def test_commutes(self, n, seed):
        r = np.random.default_rng(seed)
        a, b = r.normal(size=n), r.normal(size=n)
        ab, ba = convolve(a, b, n), convolve(b, a, n)
        assert np.max(np.abs(ab - ba)) <= 1e-12 * max(1.0, np.max(np.abs(ab)))


class TestReciprocal:
    def test_alternating(self):
        np.testing.assert_allclose(reciprocal([1, 1], 4), [1, -1, 1, -1])

    def test_unit(self):
        np.testing.assert_array_equal(reciprocal([1.0], 3), [1, 0, 0])

    def test_f1_gives_sqrt(self):
        expected = [(-1) ** m * binom(0.5, m) for m in range(8)]
        np.testing.assert_allclose(reciprocal(coeffs_f1(8), 8), expected, atol=1e-15)
        assert expected[:4] == pytest.approx([1, -0.5, -0.125, -0.0625])

    def test_zero_constant(self):
        with pytest.raises(NonInvertibleSeriesError):
            reciprocal([0.0, 1.0], 4)

    def test_warm_prefix_kept(self, rng):
        a = decaying_series(rng, 256)
        g = reciprocal(a, 64)
        full = reciprocal(a, 256, warm=g)
        np.testing.assert_array_equal(full[:64], g)
        np.testing.assert_allclose(full, reciprocal(a, 256), atol=1e-13)

    @given(st.integers(0, 2**32 - 1), st.floats(0.5, 4.0), st.booleans())
    def test_identity_property(self, seed, lead, neg):
        r = np.random.default_rng(seed)
        a = decaying_series(r, 1024, -lead if neg else lead)
        e = convolve(a, reciprocal(a, 1024), 1024)
        e[0] -= 1.0
        assert np.max(np.abs(e)) <= 1e-10


class TestDivide:
    def test_equal(self):
        np.testing.assert_allclose(divide([1, 1, 1, 1], [1, 1, 1, 1], 4), [1, 0, 0, 0], atol=1e-15)

    def test_geometric(self):
        np.testing.assert_allclose(divide([1.0], [1, -1], 3), [1, 1, 1])

    def test_ones_over_f1(self):
        np.testing.assert_allclose(divide(np.ones(8), coeffs_f1(8), 8), coeffs_f1(8), atol=1e-15)

    def test_zero_denominator(self):
        with pytest.raises(NonInvertibleSeriesError):
            divide([1.0], [0.0, 1.0], 3)

    @given(st.integers(0, 2**32 - 1))
    def test_divide_then_multiply(self, seed):
        r = np.random.default_rng(seed)
        num = r.normal(size=1024)
        den = decaying_series(r, 1024)
        q = divide(num, den, 1024)
        back = convolve(den, q, 1024)
        assert np.max(np.abs(back - num)) <= 1e-10 * max(1.0, np.max(np.abs(num)))

    def test_budget(self, rng):
        n = 1 << 14
        num, den = rng.normal(size=n), decaying_series(rng, n)
        with MulBudget() as b:
            divide(num, den, n)
        assert b.units(n) <= 2.3


class TestLogExp:
    def test_log_of_one(self):
        np.testing.assert_array_equal(log_series([1, 0, 0], 4), np.zeros(4))

    def test_log1p(self):
        np.testing.assert_allclose(log_series([1, 1], 4), [0, 1, -0.5, 1 / 3], atol=1e-15)

    def test_log_f2(self):
        np.testing.assert_allclose(
            log_series(coeffs_f2_base(4), 4), [0, 0.5, 5 / 24, 1 / 8], atol=1e-15
        )

    def test_log_needs_unit_constant(self):
        with pytest.raises(NormalizationError):
            log_series([2.0, 1.0], 3)

    def test_exp_zero(self):
        np.testing.assert_array_equal(exp_series(np.zeros(4), 4), [1, 0, 0, 0])

    def test_exp_log1p(self):
        np.testing.assert_allclose(exp_series([0, 1, -0.5, 1 / 3], 4), [1, 1, 0, 0], atol=1e-15)

    def test_exp_recovers_f2(self):
        h = 1.0 * log_series(coeffs_f2_base(64), 64)
        np.testing.assert_allclose(exp_series(h, 64), coeffs_f2_base(64), atol=1e-14)

    def test_exp_needs_zero_constant(self):
        with pytest.raises(NormalizationError):
            exp_series([0.5, 1.0], 3)

    def test_warm_start_prefix_exact(self, rng):
        h = decaying_series(rng, 512, 0.0)
        half = exp_series(h, 256)
        full = exp_series(h, 512, warm_start=half)
        np.testing.assert_array_equal(full[:256], half)
        np.testing.assert_allclose(full, exp_series(h, 512), atol=1e-13)

    def test_log_warm_prefix_exact(self, rng):
        a = decaying_series(rng, 512)
        half = log_series(a, 200)
        full = log_series(a, 512, warm=half)
        np.testing.assert_array_equal(full[:200], half)
        np.testing.assert_allclose(full, log_series(a, 512), atol=1e-13)

    @given(st.integers(0, 2**32 - 1))
    def test_round_trip(self, seed):
        r = np.random.default_rng(seed)
        a = decaying_series(r, 1024)
        back = exp_series(log_series(a, 1024), 1024)
        assert np.max(np.abs(back - a)) <= 1e-10 * np.max(np.abs(a))

    def test_warm_exp_budget(self, rng):
        n = 1 << 14
        h = decaying_series(rng, n, 0.0)
        half = exp_series(h, n // 2)
        with MulBudget() as b:
            exp_series(h, n, warm_start=half)
        assert b.units(n) <= 2.3

    def test_log_budget(self, rng):
        n = 1 << 14
        a = decaying_series(rng, n)
        with MulBudget() as b:
            log_series(a, n)
        # reciprocal to n/2 plus two half-size corrections
        assert b.units(n) <= 2.3


class TestPow:
    def test_zero_exponent(self, rng):
        np.testing.assert_array_equal(pow_series(decaying_series(rng, 5), 0, 5), [1, 0, 0, 0, 0])

    def test_square(self):
        np.testing.assert_allclose(pow_series([1, 1], 2, 3), [1, 2, 1], atol=1e-15)

    def test_sqrt_of_geometric_is_f1(self):
        np.testing.assert_allclose(pow_series(np.ones(8), 0.5, 8), coeffs_f1(8), atol=1e-15)

    def test_needs_unit_constant(self):
        with pytest.raises(NormalizationError):
            pow_series([3.0, 1.0], 0.5, 4)


class TestCalculus:
    def test_derivative(self):
        np.testing.assert_array_equal(derivative([1, 1, 1]), [1, 2])

    def test_antiderivative(self):
        np.testing.assert_allclose(antiderivative([1, 1]), [0, 1, 0.5])

    def test_fundamental_theorem(self, rng):
        a = rng.normal(size=16)
        np.testing.assert_allclose(derivative(antiderivative(a)), a, rtol=1e-15)


class TestBudget:
    def test_nested_budgets_both_charged(self):
        with MulBudget() as outer:
            with MulBudget() as inner:
                convolve(np.ones(64), np.ones(64), 64)
        assert outer.count == inner.count == 64

    def test_reset_and_monotone(self):
        b = MulBudget()
        with b:
            convolve(np.ones(64), np.ones(64), 64)
            first = b.count
            convolve(np.ones(64), np.ones(64), 64)
        assert b.count >= first
        b.reset()
        assert b.count == 0

    def test_nothing_charged_outside(self):
        b = MulBudget()
        convolve(np.ones(64), np.ones(64), 64)
        assert b.count == 0
