import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperharm.geometry import HyperbolicPoint, ModelParams, north_pole, random_rotation, sphere_rule
from hyperharm.ktypes import BoundaryFunction, KTypeIndex
from hyperharm.spherical import (
    c_growth_slope,
    eisenstein,
    eisenstein_radial,
    eisenstein_table,
    fit_c_asymptotic,
    harish_chandra_c,
    pdelta_ratio_fit,
    phi0_envelope,
    plancherel_density,
    poisson_integral,
    spherical_fn,
    tube_envelope,
)

mpmath.mp.dps = 30


def _mp_spherical(nu, t, p):
    rho = (p - 1) / 2
    return complex(mpmath.hyp2f1((rho + nu) / 2, (rho - nu) / 2, p / 2, -mpmath.sinh(t) ** 2))


@pytest.mark.parametrize("p", [2, 3, 4])
def test_spherical_fn_at_origin(p):
    mp = ModelParams(p)
    for nu in (0.0, 0.7 + 3j, 5j):
        assert spherical_fn(nu, np.array([0.0]), mp)[0] == pytest.approx(1.0, abs=1e-15)


def test_spherical_fn_h3_closed_form():
    mp = ModelParams(3)
    assert spherical_fn(1j, 1.0, mp) == pytest.approx(math.sin(1) / math.sinh(1), abs=1e-12)
    assert abs(spherical_fn(1j, 1.0, mp) - 0.71602) < 1e-5
    t = np.linspace(0.05, 10, 200)
    for lam in (0.5, 2.0, 7.5):
        closed = np.sin(lam * t) / (lam * np.sinh(t))
        env = spherical_fn(0.0, t, mp).real
        assert np.max(np.abs(spherical_fn(1j * lam, t, mp) - closed) / env) <= 1e-10


@given(st.sampled_from([2, 3, 4, 5]), st.floats(-1.5, 1.5), st.floats(-20, 20), st.floats(0, 10))
def test_spherical_fn_matches_high_precision(p, sig, lam, t):
    mp = ModelParams(p)
    nu = complex(sig * mp.rho, lam)
    ref = _mp_spherical(nu, t, p)
    env = _mp_spherical(abs(nu.real), t, p).real
    assert abs(spherical_fn(nu, t, mp) - ref) <= 1e-10 * env


@given(st.sampled_from([2, 3, 4]), st.floats(-2, 2), st.floats(-20, 20), st.floats(0, 10))
def test_spherical_fn_even_in_nu(p, sig, lam, t):
    mp = ModelParams(p)
    nu = complex(sig, lam)
    env = spherical_fn(abs(sig), t, mp).real
    assert abs(spherical_fn(nu, t, mp) - spherical_fn(-nu, t, mp)) <= 1e-10 * env


@pytest.mark.parametrize("p", [2, 3, 4])
def test_spherical_fn_against_boundary_quadrature(p):
    mp = ModelParams(p)
    ts = np.linspace(0, 10, 11)
    worst = 0.0
    for nu in (0.0, 0.5 * mp.rho + 4j, mp.rho + 15j, 19.5j):
        hyp = spherical_fn(nu, ts, mp)
        quad = np.array([eisenstein_radial(nu, t, 0, mp) for t in ts])
        env = spherical_fn(nu.real, ts, mp).real
        worst = max(worst, float(np.max(np.abs(hyp - quad) / env)))
    assert worst <= 1e-8


def test_eisenstein_trivial_type_is_spherical_function():
    mp = ModelParams(3)
    x = HyperbolicPoint.polar(1.3, [0.2, 0.5, 0.8])
    val = eisenstein(0.4 + 2j, x, KTypeIndex(3, 0), mp).matrix
    assert val.shape == (1, 1)
    assert val[0, 0] == pytest.approx(spherical_fn(0.4 + 2j, 1.3, mp), abs=1e-12)


def test_eisenstein_ratio_law_p3_l1():
    mp, delta = ModelParams(3), KTypeIndex(3, 1)
    x = HyperbolicPoint.polar(1.0, north_pole(3))
    nu = 0.3
    ratio = eisenstein(nu, x, delta, mp).matrix[0, 0] / eisenstein(-nu, x, delta, mp).matrix[0, 0]
    assert abs(ratio - (nu + 1) / (-nu + 1)) <= 1e-6


def test_eisenstein_only_first_column():
    mp, delta = ModelParams(3), KTypeIndex(3, 2)
    x = HyperbolicPoint.polar(0.8, [1.0, 0.3, -0.2])
    mat = eisenstein(1.5j, x, delta, mp).matrix
    assert np.all(mat[:, 1:] == 0)


@pytest.mark.parametrize("pair", [(3, 1), (3, 2), (3, 3), (2, 1), (2, -2), (2, 4)])
def test_ratio_fit_recovers_degree(pair):
    p, label = pair
    delta = KTypeIndex(p, label)
    s, residuals = pdelta_ratio_fit(delta, ModelParams(p))
    assert s == delta.s
    assert residuals[s] <= 1e-6


# --- c-function ----------------------------------------------------------

@pytest.mark.parametrize("p", [2, 3, 4, 5])
def test_c_normalization(p):
    mp = ModelParams(p)
    assert complex(harish_chandra_c(mp.rho, mp)) == pytest.approx(1.0, abs=1e-14)


@given(st.sampled_from([2, 3, 4, 5]), st.floats(0.01, 80))
def test_c_against_gamma_oracle(p, lam):
    mp = ModelParams(p)
    rho = mpmath.mpf(p - 1) / 2
    ref = mpmath.gamma(2 * rho) * mpmath.gamma(1j * lam) / (mpmath.gamma(rho) * mpmath.gamma(1j * lam + rho))
    assert abs(complex(harish_chandra_c(1j * lam, mp)) - complex(ref)) <= 1e-12 * abs(complex(ref))
    assert plancherel_density(lam, mp) == pytest.approx(1.0 / abs(complex(ref)) ** 2, rel=1e-12)


def test_plancherel_density_p3_is_quadratic():
    mp = ModelParams(3)
    lam = np.geomspace(0.5, 50, 40)
    ratio = plancherel_density(lam, mp) / lam ** 2
    assert np.ptp(ratio) / np.mean(ratio) <= 1e-8


@pytest.mark.parametrize("p", [2, 3])
def test_c_matches_large_radius_asymptotics(p):
    mp = ModelParams(p)
    for lam in (1.0, 3.0):
        fitted = fit_c_asymptotic(lam, mp)
        exact = complex(harish_chandra_c(1j * lam, mp))
        assert abs(fitted - exact) <= 1e-6 * abs(exact)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_c_growth_slope(p):
    mp = ModelParams(p)
    assert abs(c_growth_slope(mp) - mp.n / 2) <= 0.1


@pytest.mark.parametrize("p", [2, 3])
def test_envelopes(p):
    mp = ModelParams(p)
    t = np.linspace(0.1, 20, 100)
    lower, const = phi0_envelope(mp, t)
    assert lower and const <= 10
    assert tube_envelope(mp, 0.5, t, [0.0, 3.0]) <= 10


# --- Poisson integral ----------------------------------------------------

def test_poisson_of_constant_is_spherical_function():
    mp = ModelParams(3)
    one = BoundaryFunction(3, {0: np.array([1.0])})
    x = HyperbolicPoint.polar(2.0, [0.3, 0.1, 0.9])
    nu = 0.3 + 4j
    assert complex(poisson_integral(one, nu, x, mp)) == pytest.approx(spherical_fn(nu, 2.0, mp), abs=1e-12)


def test_poisson_of_harmonic_is_eisenstein_entry():
    mp, delta = ModelParams(3), KTypeIndex(3, 2)
    x = HyperbolicPoint.polar(1.1, [0.6, -0.3, 0.2])
    nu = 0.25 + 1.5j
    mat = eisenstein(nu, x, delta, mp).matrix
    for j in range(delta.dim):
        coeff = np.zeros(delta.dim, dtype=complex)
        coeff[j] = 1.0
        # conj(Y_j) has the same real basis coefficient
        val = complex(poisson_integral(BoundaryFunction(3, {2: coeff}), nu, x, mp))
        assert val == pytest.approx(mat[j, 0] * math.sqrt(delta.dim), abs=1e-12)


@given(st.integers(0, 2**32 - 1))
def test_poisson_degree_zero_bound(seed):
    rng = np.random.default_rng(seed)
    p = int(rng.choice([2, 3]))
    mp = ModelParams(p)
    labels = range(-3, 4) if p == 2 else range(4)
    phi = BoundaryFunction(p, {lab: rng.normal(size=KTypeIndex(p, lab).dim) for lab in labels})
    pts, _ = sphere_rule(p, 96)
    sup = float(np.max(np.abs(phi.evaluate(pts))))
    sigma = rng.uniform(-2, 2) * mp.rho
    nu = sigma + 1j * rng.uniform(-10, 10)
    t = rng.uniform(0, 4)
    x = HyperbolicPoint.polar(t, random_rotation(p, rng) @ north_pole(p))
    assert abs(complex(poisson_integral(phi, nu, x, mp))) <= spherical_fn(sigma, t, mp).real * sup * (1 + 1e-12)


def test_eisenstein_table_matches_pointwise():
    mp = ModelParams(3)
    table = eisenstein_table(mp, 1, 0.5, 0.25, 9, 0.5, 5)
    assert table.shape == (5, 9)
    lam = np.arange(9) * 0.25
    for i in range(5):
        ref = eisenstein_radial(0.5 + 1j * lam, i * 0.5, 1, mp, n_alpha=200)
        np.testing.assert_allclose(table[i], ref, atol=1e-12)
    # extending the cached table keeps the earlier rows
    longer = eisenstein_table(mp, 1, 0.5, 0.25, 9, 0.5, 8)
    np.testing.assert_array_equal(longer[:5], table)
