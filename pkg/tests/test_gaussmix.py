import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coevgan.gaussmix import (Interval, UnitGaussianMixture, mixture_interval_prob, mixture_pdf, normal_cdf,
                              prob_deriv_wrt_mean, unit_mass)

# Phi(1) by adaptive quadrature of the pdf over (-inf, 1] (scipy.integrate.quad, tol 1e-14);
# agrees with mpmath.ncdf(1) to all printed digits.
PHI_1 = 0.841344746068543
# Monte Carlo, 10**7 draws from 0.5 N(-1,1) + 0.5 N(2.5,1), seed 12345: fraction in [-2, 0].
MC_PROB = 0.3446574
MC_PROB_SE = 0.00015028927993214952

reals = st.floats(min_value=-40, max_value=40, allow_nan=False)


def test_normal_cdf_known_values():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.0) == pytest.approx(PHI_1, abs=1e-12)
    assert normal_cdf(math.inf) == 1.0
    assert normal_cdf(-math.inf) == 0.0


def test_normal_cdf_rejects_nan():
    with pytest.raises(ValueError):
        normal_cdf(float("nan"))


@given(reals)
def test_normal_cdf_symmetry(z):
    assert abs(normal_cdf(z) + normal_cdf(-z) - 1.0) <= 1e-12


@given(reals, reals)
def test_normal_cdf_monotone(a, b):
    lo, hi = sorted((a, b))
    assert normal_cdf(lo) <= normal_cdf(hi)


def test_interval_validation():
    with pytest.raises(ValueError):
        Interval(1.0, 0.0)
    with pytest.raises(ValueError):
        UnitGaussianMixture([0.0, 1.0], [0.7, 0.7])


def test_zero_length_interval_has_no_mass():
    mix = UnitGaussianMixture([-1.0, 2.5])
    assert mixture_interval_prob(mix, Interval(0.3, 0.3)) == 0.0


def test_total_mass():
    mix = UnitGaussianMixture([0.0, 0.0], [0.5, 0.5])
    assert mixture_interval_prob(mix, Interval(-50, 50)) == pytest.approx(1.0, abs=1e-12)
    assert mixture_interval_prob(mix, Interval(-math.inf, math.inf)) == 1.0


def test_interval_prob_matches_monte_carlo():
    mix = UnitGaussianMixture([-1.0, 2.5])
    p = mixture_interval_prob(mix, Interval(-2.0, 0.0))
    assert abs(p - MC_PROB) < 3 * MC_PROB_SE


@given(st.lists(reals, min_size=1, max_size=4), reals, reals, reals)
def test_interval_prob_additive_and_bounded(means, a, b, c):
    lo, mid, hi = sorted((a, b, c))
    mix = UnitGaussianMixture(means)
    p1 = mixture_interval_prob(mix, Interval(lo, mid))
    p2 = mixture_interval_prob(mix, Interval(mid, hi))
    p = mixture_interval_prob(mix, Interval(lo, hi))
    assert 0.0 <= p <= 1.0
    assert abs(p - (p1 + p2)) <= 1e-12


def test_pdf_values():
    single = UnitGaussianMixture([0.0], [1.0])
    assert mixture_pdf(single, 0.0) == pytest.approx(1 / math.sqrt(2 * math.pi), abs=1e-15)
    mu = 1.7
    other = UnitGaussianMixture([mu], [1.0])
    for x in (-3.0, 0.2, 4.4):
        assert mixture_pdf(other, x) == pytest.approx(mixture_pdf(other, 2 * mu - x), rel=1e-14)


def test_pdf_integrates_to_one():
    mix = UnitGaussianMixture([-1.0, 2.5, 7.0], [0.2, 0.5, 0.3])
    xs = np.arange(-5000, 5001) * 0.01
    ys = np.array([mixture_pdf(mix, x) for x in xs])
    assert np.trapezoid(ys, xs) == pytest.approx(1.0, abs=1e-6)


def _fd(mean, iv, h=1e-5):
    mix = lambda m: UnitGaussianMixture([m], [1.0])  # noqa: E731
    return (mixture_interval_prob(mix(mean + h), iv) - mixture_interval_prob(mix(mean - h), iv)) / (2 * h)


def test_deriv_examples():
    iv = Interval(-1.0, 3.0)
    assert abs(prob_deriv_wrt_mean(1.0, iv)) <= 1e-12
    assert prob_deriv_wrt_mean(iv.lo - 10, iv) > 0
    iv = Interval(1.0, 2.0)
    assert prob_deriv_wrt_mean(0.0, iv) == pytest.approx(_fd(0.0, iv), rel=1e-5)


def test_deriv_matches_finite_differences_sweep():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        mean = rng.uniform(-5, 5)
        lo = rng.uniform(-5, 5)
        iv = Interval(lo, lo + rng.uniform(0.1, 5))
        exact = prob_deriv_wrt_mean(mean, iv)
        approx = _fd(mean, iv)
        assert abs(exact - approx) <= 1e-5 * abs(exact) + 1e-10


@settings(max_examples=50)
@given(reals, reals)
def test_vectorized_mass_matches_scalar(a, b):
    lo, hi = sorted((a, b))
    mix = UnitGaussianMixture([0.0], [1.0])
    assert float(unit_mass(lo, hi)) == pytest.approx(mixture_interval_prob(mix, Interval(lo, hi)), abs=1e-15)
