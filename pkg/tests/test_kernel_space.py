import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.special import binom, gammaln

from flagbundle.kernel_space import (DimensionError, DomainError, KernelSpace, coeff_inner,
                                     coeff_norm_sq, explicit_weights, hardy_space, kernel_eval,
                                     power_space, power_weights, section_norm_sq,
                                     section_norm_sq_many)


def series_oracle(lam, N):
    # Taylor coefficients of (1 - x)^(-lam) by repeated convolution of the geometric series
    # (integer lam only), independent of the Gamma formula
    c = np.zeros(N)
    c[0] = 1.0
    geo = np.ones(N)
    for _ in range(lam):
        c = np.convolve(c, geo)[:N]
    return c


class TestPowerWeights:
    def test_hardy_weights_are_one(self):
        assert np.array_equal(power_weights(1, 4).weights, [1, 1, 1, 1])

    def test_lambda_two_matches_series(self):
        w = power_weights(2, 4).weights
        assert np.allclose(w, series_oracle(2, 4), rtol=0, atol=0)
        assert list(w) == [1, 2, 3, 4]

    def test_lambda_three_k2_binomial(self):
        assert power_weights(3, 5).weights[2] == binom(4, 2) == 6

    @pytest.mark.parametrize("lam", [1, 2, 3, 5])
    def test_integer_lambda_series_oracle(self, lam):
        assert np.allclose(power_weights(lam, 60).weights, series_oracle(lam, 60), rtol=1e-13)

    @pytest.mark.parametrize("lam", [0.5, 1.7, 2.25])
    def test_fractional_gamma(self, lam):
        k = np.arange(40)
        ref = np.exp(gammaln(lam + k) - gammaln(lam) - gammaln(k + 1))
        assert np.allclose(power_weights(lam, 40).weights, ref, rtol=1e-12)

    @pytest.mark.parametrize("lam", [0, -1, -0.5])
    def test_non_positive_lambda(self, lam):
        with pytest.raises(DomainError):
            power_weights(lam, 4)

    def test_needs_two_terms(self):
        with pytest.raises((DomainError, DimensionError, ValueError)):
            power_weights(1, 1)

    def test_explicit_rejects_non_positive(self):
        with pytest.raises(DomainError):
            explicit_weights([1, 0, 2])


class TestKernelEval:
    def test_origin(self):
        assert kernel_eval(hardy_space(16), 0, 0) == 1

    def test_bergman_closed_form(self):
        assert abs(kernel_eval(power_space(2, 64), 0.5, 0.5) - 16 / 9) < 1e-9

    def test_explicit_two_terms(self):
        sp = KernelSpace(explicit_weights([1, 1]))
        assert kernel_eval(sp, 1, 1) == 2

    @settings(max_examples=60, deadline=None)
    @given(st.complex_numbers(max_magnitude=0.9), st.complex_numbers(max_magnitude=0.9),
           st.sampled_from([1, 2, 3]))
    def test_conjugate_symmetry(self, z, w, lam):
        sp = power_space(lam, 128)
        assert abs(kernel_eval(sp, z, w) - np.conj(kernel_eval(sp, w, z))) < 1e-12 * (1 + abs(kernel_eval(sp, z, w)))


class TestSectionNorm:
    def test_origin(self):
        assert section_norm_sq(hardy_space(16), 0) == 1

    def test_hardy_half(self):
        assert abs(section_norm_sq(hardy_space(200), 0.5) - 4 / 3) < 1e-12

    def test_bergman_half(self):
        assert abs(section_norm_sq(power_space(2, 200), 0.5) - 16 / 9) < 1e-9

    @pytest.mark.parametrize("lam", [1, 2, 3, 1.5])
    def test_closed_form_to_09(self, lam):
        sp = power_space(lam, 400)
        r = np.linspace(0, 0.9, 19)
        w = r * np.exp(0.37j)
        ref = (1 - r ** 2) ** (-lam)
        got = section_norm_sq_many(sp, w)
        assert np.max(np.abs(got / ref - 1)) < 1e-8

    def test_matches_kernel_at_conjugate(self):
        sp = power_space(2, 128)
        w = 0.3 - 0.4j
        assert abs(section_norm_sq(sp, w) - kernel_eval(sp, np.conj(w), np.conj(w))) < 1e-13


class TestCoeffInner:
    def test_hardy_monomial(self):
        assert coeff_inner(hardy_space(8), [0, 1], [0, 1]) == 1

    def test_bergman_monomial(self):
        assert abs(coeff_inner(power_space(2, 8), [0, 1], [0, 1]) - 0.5) < 1e-15

    def test_distinct_monomials(self):
        assert coeff_inner(power_space(3, 8), [1], [0, 1]) == 0

    def test_too_long(self):
        with pytest.raises(DimensionError):
            coeff_inner(hardy_space(4), np.ones(5), np.ones(2))

    @settings(max_examples=60, deadline=None)
    @given(arrays(complex, 12, elements=st.one_of(
        st.just(0j), st.complex_numbers(min_magnitude=1e-100, max_magnitude=10))),
           st.sampled_from([1, 2, 3]))
    def test_positive_definite(self, f, lam):
        sp = power_space(lam, 12)
        v = coeff_norm_sq(sp, f)
        assert v >= 0
        assert (v == 0) == (not np.any(f))

    @settings(max_examples=40, deadline=None)
    @given(arrays(complex, 8, elements=st.complex_numbers(max_magnitude=5, allow_nan=False)),
           arrays(complex, 8, elements=st.complex_numbers(max_magnitude=5, allow_nan=False)))
    def test_conjugate_symmetric(self, f, g):
        sp = power_space(2, 8)
        assert abs(coeff_inner(sp, f, g) - np.conj(coeff_inner(sp, g, f))) < 1e-9

    def test_orthonormal_basis_round_trip(self):
        sp = power_space(3, 10)
        # e_k = sqrt(a_k) z^k has unit norm
        for k in range(10):
            f = np.zeros(10)
            f[k] = math.sqrt(sp.a[k])
            assert abs(coeff_norm_sq(sp, f) - 1) < 1e-14
        x = np.arange(10) + 1j
        assert np.allclose(sp.to_monomial(sp.to_orthonormal(x)), x)
