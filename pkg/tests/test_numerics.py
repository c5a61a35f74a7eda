import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperharm.numerics import (
    ConvergenceError,
    NonFiniteError,
    PoleError,
    Polynomial,
    check_finite,
    compensated_sum,
    divided_difference,
    fd_weights,
    gamma_ln,
    gauss_legendre,
    gregory,
    hyp2f1,
    integrate,
    rgamma,
    trapezoid,
)

mpmath.mp.dps = 40


def _mp_hyp2f1(a, b, c, x):
    return complex(mpmath.hyp2f1(mpmath.mpc(a), mpmath.mpc(b), mpmath.mpc(c), x))


# --- log Gamma ------------------------------------------------------------

def test_gamma_ln_integer_and_half():
    assert gamma_ln(5.0) == pytest.approx(math.log(24.0), abs=1e-14)
    assert gamma_ln(0.5) == pytest.approx(0.5 * math.log(math.pi), abs=1e-14)


def test_gamma_ln_complex_matches_high_precision():
    z = 3 + 4j
    ref = complex(mpmath.loggamma(mpmath.mpc(3, 4)))
    assert abs(gamma_ln(z) - ref) <= 1e-12 * abs(ref)


@given(st.floats(-30, 30), st.floats(-30, 30))
def test_gamma_ln_branch_matches_loggamma(re, im):
    z = complex(re, im)
    if abs(z.imag) < 1e-6 and z.real <= 0 and abs(z.real - round(z.real)) < 1e-6:
        return
    ref = complex(mpmath.loggamma(mpmath.mpc(re, im)))
    assert abs(gamma_ln(z) - ref) <= 1e-11 * max(1.0, abs(ref))


@given(st.floats(-20, 20), st.floats(-20, 20))
def test_gamma_ln_satisfies_recursion(re, im):
    # log Gamma(z + 1) = log Gamma(z) + log z, up to a multiple of 2 pi i
    z = complex(re, im)
    if abs(z) < 1e-3 or (abs(z.imag) < 1e-6 and z.real <= 0 and abs(z.real - round(z.real)) < 1e-6):
        return
    gap = gamma_ln(z + 1) - gamma_ln(z) - np.log(z)
    assert abs(gap.real) <= 1e-11 * max(1.0, abs(gamma_ln(z)))
    assert abs(gap.imag / (2 * math.pi) - round(gap.imag / (2 * math.pi))) <= 1e-11 * max(1.0, abs(gamma_ln(z)))


def test_gamma_ln_rejects_poles():
    with pytest.raises(PoleError):
        gamma_ln(-3.0)
    assert rgamma(-2.0) == 0


# --- hypergeometric -------------------------------------------------------

def test_hyp2f1_trivial_values():
    assert hyp2f1(0.3 + 1j, 2.0, 1.7, 0.0) == 1.0
    assert hyp2f1(1, 1, 2, -1.0) == pytest.approx(math.log(2.0), abs=1e-15)


def test_hyp2f1_complex_parameters_against_high_precision():
    a, b, c, x = 0.5 + 2j, 0.5 - 2j, 1.5, -1.2
    ref = _mp_hyp2f1(a, b, c, x)
    assert abs(hyp2f1(a, b, c, x) - ref) <= 1e-13 * abs(ref)


@given(
    st.floats(0.0, 3.0),
    st.floats(-20.0, 20.0),
    st.sampled_from([1.0, 1.5, 2.0, 2.5]),
    st.floats(-1e6, 0.0),
)
def test_hyp2f1_spherical_family_against_high_precision(rho2, lam, c, x):
    # parameters of the spherical function: a, b = (rho +- nu) / 2
    nu = complex(0.3 * rho2, lam)
    rho = c - 0.5
    a, b = 0.5 * (rho + nu), 0.5 * (rho - nu)
    ref = _mp_hyp2f1(a, b, c, x)
    envelope = abs(_mp_hyp2f1(0.5 * (rho + nu.real), 0.5 * (rho - nu.real), c, x))
    assert abs(hyp2f1(a, b, c, x) - ref) <= 1e-10 * max(envelope, abs(ref))


@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(-50.0, 0.0))
def test_hyp2f1_symmetric_in_a_b(ar, br, x):
    a, b = complex(ar, 0.5), complex(br, -0.25)
    assert hyp2f1(a, b, 1.5, x) == hyp2f1(b, a, 1.5, x)


def test_hyp2f1_integer_gap_circle_average():
    # c - a - b integer is the degenerate case of the connection formula
    a, b, c = 0.5, 0.5, 1.0
    for x in (-50.0, -1e4):
        ref = _mp_hyp2f1(a, b, c, x)
        assert abs(hyp2f1(a, b, c, x) - ref) <= 1e-12 * abs(ref)


def test_hyp2f1_errors():
    with pytest.raises(PoleError):
        hyp2f1(1, 1, -2, -0.5)
    with pytest.raises(ValueError):
        hyp2f1(1, 1, 2, 0.5)
    with pytest.raises(NonFiniteError):
        hyp2f1(1, 1, 2, float("nan"))
    assert issubclass(ConvergenceError, ArithmeticError)


# --- quadrature -----------------------------------------------------------

def test_gauss_legendre_polynomial_exactness():
    rule = gauss_legendre(8, 0.0, 1.0)
    assert integrate(rule, rule.nodes ** 2) == pytest.approx(1.0 / 3.0, abs=1e-14)
    assert integrate(rule, np.zeros(8)) == 0.0


@given(st.integers(0, 15))
def test_gauss_legendre_exact_to_degree_2n_minus_1(k):
    rule = gauss_legendre(8, -1.0, 2.0)
    exact = (2.0 ** (k + 1) - (-1.0) ** (k + 1)) / (k + 1)
    assert integrate(rule, rule.nodes ** k) == pytest.approx(exact, rel=1e-13, abs=1e-13)


def test_trapezoid_exponential():
    rule = trapezoid(0.0, 1.0, n=4096)
    assert abs(integrate(rule, np.exp(rule.nodes)) - (math.e - 1.0)) <= 1e-7


@given(st.integers(0, 7))
def test_gregory_exact_below_order(k):
    rule = gregory(0.0, 3.0, n=64, order=8)
    assert integrate(rule, rule.nodes ** k) == pytest.approx(3.0 ** (k + 1) / (k + 1), rel=1e-12)


def test_compensated_sum_recovers_cancellation():
    vals = np.array([1e16, 1.0, -1e16, 1.0])
    assert compensated_sum(vals) == 2.0


@given(st.lists(st.floats(-1e10, 1e10), min_size=1, max_size=50))
def test_compensated_sum_matches_fsum(values):
    assert compensated_sum(np.array(values)) == pytest.approx(math.fsum(values), rel=1e-15, abs=1e-6)


def test_check_finite():
    with pytest.raises(NonFiniteError):
        check_finite(np.array([1.0, np.inf]))


# --- finite differences and divided differences --------------------------

def test_fd_weights_central_second_derivative():
    w = fd_weights(np.array([-1, 0, 1]), 2)
    np.testing.assert_allclose(w, [1.0, -2.0, 1.0], atol=1e-14)


def test_divided_difference_trivial():
    nus = 1.0 + 1j * np.arange(-10, 11) * 0.1
    nu0 = 1.0 + 0j
    q = divided_difference(nus - nu0, nus, nu0)
    np.testing.assert_allclose(q, 1.0, atol=1e-12)
    q2 = divided_difference((nus - nu0) ** 2, nus, nu0)
    np.testing.assert_allclose(q2, nus - nu0, atol=1e-12)


def test_divided_difference_smooth_quotient():
    nus = 1.0 + 1j * np.arange(-40, 41) / 16
    h = np.sin(nus - 1.0) * np.exp(nus)
    q = divided_difference(h, nus, 1.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        ref = np.where(nus == 1.0, np.exp(1.0), h / (nus - 1.0))
    np.testing.assert_allclose(q, ref, rtol=1e-10, atol=1e-10)


# --- polynomials ----------------------------------------------------------

def test_polynomial_roots_and_reflect():
    p = Polynomial.from_roots([-1.0, -2.0])
    assert p.degree == 2
    assert p(0.5) == pytest.approx(1.5 * 2.5)
    assert p.reflect()(0.5) == pytest.approx(p(-0.5))
    np.testing.assert_allclose(sorted(np.real(p.roots())), [-2.0, -1.0])
