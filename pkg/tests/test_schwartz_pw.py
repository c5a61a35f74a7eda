import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from hyperharm.geometry import ModelParams
from hyperharm.ktypes import KTypeIndex
from hyperharm.numerics import Polynomial, gregory
from hyperharm.schwartz_pw import (
    CutoffSpec,
    SeminormSpec,
    continuity_report,
    cutoff_decompose,
    cutoff_omega,
    exponential_type,
    paley_wiener_report,
    root_quotient,
    spatial_seminorm,
    spectral_seminorm,
    tube_holomorphy_residual,
)
from hyperharm.spherical import spherical_fn
from hyperharm.transforms import (
    CalibrationRegistry,
    Grids,
    RadialGrid,
    RadonFunction,
    SpatialFunction,
    SpectralFunction,
    SpectralGrid,
    bump_profile,
    calibrate_plancherel,
    delta_spherical,
    euclid_fourier,
    generalized_abel,
    helgason_fourier,
    smooth_bump_profile,
)


# --- seminorm specs ------------------------------------------------------

def test_seminorm_spec_validation():
    with pytest.raises(ValueError):
        SeminormSpec("both")
    with pytest.raises(ValueError):
        SeminormSpec("spatial", lp=3.0)
    assert SeminormSpec.paired(1.0).epsilon == 1.0
    assert SeminormSpec.paired(2.0).epsilon == 0.0
    with pytest.raises(ValueError):
        spatial_seminorm(SpatialFunction.from_profile(ModelParams(3), bump_profile(1.0)), SeminormSpec("spectral"))


# --- spatial seminorm ----------------------------------------------------

def test_spatial_seminorm_of_zero():
    mp = ModelParams(3)
    f = SpatialFunction(mp, RadialGrid(), {}, support=1.0)
    assert spatial_seminorm(f, SeminormSpec("spatial")).value == 0.0


@pytest.mark.parametrize("p,lp", [(2, 2.0), (3, 2.0), (3, 1.0)])
def test_spatial_seminorm_brute_force(p, lp):
    mp = ModelParams(p)
    f = SpatialFunction.from_profile(mp, bump_profile(2.0, 3))
    val = spatial_seminorm(f, SeminormSpec("spatial", lp=lp, N=0))
    t = f.grid.t
    scan = max(abs(float(bump_profile(2.0, 3)(np.array([ti]))[0])) * spherical_fn(0.0, ti, mp).real ** (-2 / lp)
               for ti in t[::8])
    assert val.value == pytest.approx(scan, rel=1e-3)
    assert val.value >= scan
    assert val.tail_bound == 0.0


def test_spatial_seminorm_monotone_in_n():
    mp = ModelParams(3)
    f = SpatialFunction.from_profile(mp, bump_profile(1.0, 4, center=2.0))
    vals = [spatial_seminorm(f, SeminormSpec("spatial", N=n)).value for n in range(0, 6)]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_spatial_seminorm_casimir_scales_by_eigenvalue():
    mp, delta = ModelParams(3), KTypeIndex(3, 2)
    f = SpatialFunction.from_profile(mp, bump_profile(2.0, 4, degree=2), delta, np.ones(5))
    base = spatial_seminorm(f, SeminormSpec("spatial")).value
    assert spatial_seminorm(f, SeminormSpec("spatial", casimir=1)).value == pytest.approx(6 * base, rel=1e-12)


# --- spectral seminorm ---------------------------------------------------

def test_spectral_seminorm_trivial_cases():
    mp = ModelParams(3)
    grid = SpectralGrid(8.0, 1 / 8, epsilon=1.0)
    zero = SpectralFunction(mp, grid, grid.sigmas(mp), {})
    assert spectral_seminorm(zero, SeminormSpec("spectral", epsilon=1.0)).value == 0.0
    psi = helgason_fourier(SpatialFunction.from_profile(mp, bump_profile(2.0, 4)), grid)
    val = spectral_seminorm(psi, SeminormSpec("spectral", epsilon=1.0, N=0)).value
    assert val == pytest.approx(float(np.max(np.abs(psi.coefficients[0]))), rel=1e-14)


def test_spectral_seminorm_needs_tube_lines():
    mp = ModelParams(3)
    psi = helgason_fourier(SpatialFunction.from_profile(mp, bump_profile(2.0, 4)), SpectralGrid(8.0), sigmas=(0.0,))
    with pytest.raises(ValueError, match="insufficient tube sampling"):
        spectral_seminorm(psi, SeminormSpec("spectral", epsilon=1.0))


def test_spectral_derivative_matches_analytic():
    # psi(nu) = exp(nu^2) on the line: d/dnu psi = 2 nu psi
    mp = ModelParams(3)
    grid = SpectralGrid(4.0, 1 / 32)
    nus = 1j * grid.lambdas
    psi = SpectralFunction(mp, grid, (0.0,), {0: np.exp(nus ** 2)[None, None, :]})
    got = spectral_seminorm(psi, SeminormSpec("spectral", poly=Polynomial((0.0, 1.0)))).value
    assert got == pytest.approx(float(np.max(np.abs(2 * nus * np.exp(nus ** 2)))), rel=1e-8)


@pytest.mark.parametrize("p,eps", [(2, 0.0), (3, 1.0)])
def test_rapid_decrease(p, eps):
    mp = ModelParams(p)
    f = SpatialFunction.from_profile(mp, smooth_bump_profile(4.0, sharpness=3.0))
    for n in (0, 4, 8):
        tails = []
        for lam_max in (16.0, 32.0, 64.0):
            psi = helgason_fourier(f, SpectralGrid(lam_max, 1 / 16, eps))
            val = spectral_seminorm(psi, SeminormSpec("spectral", epsilon=eps, N=n))
            assert math.isfinite(val.value)
            tails.append(val.tail_bound)
        assert tails[0] > tails[1] > tails[2]


# --- exponential type ----------------------------------------------------

def test_exponential_type_of_constant_is_zero():
    lam = np.linspace(-64, 64, 2049)
    rep = exponential_type(lambda s: (lam, np.ones_like(lam)), 1.0)
    assert rep.r_hat <= 1e-3


def test_exponential_type_classical_transform():
    mp = ModelParams(3)
    radial = RadialGrid(12.0, 1 / 256)
    t = radial.line
    phi = RadonFunction(mp, radial, {0: bump_profile(2.0, 3)(np.abs(t))[None, :].astype(complex)})
    grid = SpectralGrid()

    def evaluate(sigma):
        return grid.lambdas, euclid_fourier(phi, grid, sigmas=(sigma,)).coefficients[0][:, 0, :]

    rep = exponential_type(evaluate, mp.rho, grid.lambda_max)
    assert 1.9 <= rep.r_hat <= 2.1


@pytest.mark.parametrize("p", [2, 3])
def test_exponential_type_helgason(p):
    mp = ModelParams(p)
    f = SpatialFunction.from_profile(mp, bump_profile(2.0, 3))
    rep = paley_wiener_report(f)
    assert 1.9 <= rep.r_hat <= 2.1
    assert rep.support_estimate == 2.0
    assert set(rep.as_dict()) >= {"r_hat", "support_estimate"}


# --- cutoff --------------------------------------------------------------

def test_cutoff_omega_values():
    spec3 = CutoffSpec(3)
    assert cutoff_omega(spec3, np.array([1.5]))[0] == 1.0
    assert cutoff_omega(spec3, np.array([3.5]))[0] == 0.0
    t = np.linspace(1.0, 8.0, 701)
    np.testing.assert_allclose(cutoff_omega(CutoffSpec(4), t), cutoff_omega(spec3, t - 1.0), atol=1e-15)
    with pytest.raises(ValueError):
        CutoffSpec(0)


def test_cutoff_step_against_adaptive_quadrature():
    a = 3.0
    bump = lambda x: math.exp(-a / (x * (1 - x)))
    total = quad(bump, 0, 1, epsabs=1e-16, epsrel=1e-14)[0]
    for x in (0.1, 0.3, 0.5, 0.77, 0.95):
        ref = quad(bump, 0, x, epsabs=1e-16, epsrel=1e-14)[0] / total
        # omega_1(1 - x) = S(x)
        assert cutoff_omega(CutoffSpec(1, a), np.array([1.0 - x]))[0] == pytest.approx(ref, abs=1e-14)


@given(st.floats(0.0, 1.0), st.floats(0.5, 6.0))
def test_cutoff_step_symmetry_and_range(x, a):
    spec = CutoffSpec(1, a)
    s1 = cutoff_omega(spec, np.array([1.0 - x]))[0]
    s2 = cutoff_omega(spec, np.array([x]))[0]
    assert 0.0 <= s1 <= 1.0
    assert s1 + s2 == pytest.approx(1.0, abs=1e-14)


@pytest.fixture(scope="module")
def cutoff_setup():
    mp = ModelParams(3)
    grids = Grids(RadialGrid(8.0), SpectralGrid(128.0, 1 / 16))
    reg = CalibrationRegistry()
    calibrate_plancherel(mp, grids, reg)
    return mp, grids, reg


def test_cutoff_beyond_support(cutoff_setup):
    mp, grids, reg = cutoff_setup
    delta = KTypeIndex(3, 1)
    f = SpatialFunction.from_profile(mp, bump_profile(2.0, 8, degree=1), delta.contragredient, np.ones(3), grid=grids.radial)
    h = delta_spherical(f, delta, grids.spectral, sigmas=(0.0,))
    res = cutoff_decompose(h, CutoffSpec(4), grids.radial, registry=reg)
    assert np.max(np.abs(res.H_j.rows)) <= 1e-10 * np.max(np.abs(res.G.rows))
    assert res.f_j.sup() <= 1e-8 * res.f_rec.sup()
    assert res.evenness_residual <= 1e-9


def test_cutoff_localizes(cutoff_setup):
    mp, grids, reg = cutoff_setup
    delta = KTypeIndex(3, 1)
    f = SpatialFunction.from_profile(mp, bump_profile(6.0, 8, degree=1), delta.contragredient, np.ones(3), grid=grids.radial)
    h = delta_spherical(f, delta, grids.spectral, sigmas=(0.0,))
    res = cutoff_decompose(h, CutoffSpec(4), grids.radial, registry=reg)
    assert res.localization <= 1e-6
    assert res.reflection_residual <= 1e-8


def test_root_quotient_matches_abel_oracle():
    mp, delta = ModelParams(3), KTypeIndex(3, 1)
    f = SpatialFunction.from_profile(mp, bump_profile(2.0, 8, degree=1), delta, np.array([1.0, 2.0, 3.0]) / 3)
    grid = SpectralGrid(epsilon=1.0)
    h = delta_spherical(f, delta, grid)
    q = root_quotient(h, 1.0)
    assert np.all(np.isfinite(q))
    abel = generalized_abel(f, delta)
    t = abel.t
    w = gregory(t[0], t[-1], n=t.size - 1).weights
    i0 = grid.n_half - 1
    for k in range(i0 - 5, i0 + 6):
        nu = 1.0 + 1j * grid.lambdas[k]
        if k == i0:
            ref = (abel.rows * (w * t * np.exp(-t))).sum(axis=1)
        else:
            ref = (abel.rows * (w * np.exp(-nu * t))).sum(axis=1) / (1.0 - nu)
        assert np.max(np.abs(q[:, k] - ref)) <= 1e-10 * np.max(np.abs(ref))


# --- tube holomorphy and continuity --------------------------------------

def test_tube_holomorphy():
    mp = ModelParams(3)
    gauss = SpatialFunction.from_profile(mp, lambda r: np.exp(-r * r))
    assert tube_holomorphy_residual(gauss, epsilon=1.0) <= 1e-7


def test_continuity_homogeneity_and_zero_member():
    mp = ModelParams(2)
    f = SpatialFunction.from_profile(mp, bump_profile(1.5, 4))
    zero = SpatialFunction(mp, f.grid, {0: np.zeros((1, f.grid.n))}, support=1.0)
    spatial = SeminormSpec("spatial", N=2)
    spectral = SeminormSpec.paired(2.0, N=6)
    rows = continuity_report([("f", f), ("zero", zero), ("2f", f.scaled(2.0))], spatial, spectral)
    assert [r.name for r in rows] == ["f", "2f"]
    assert rows[1].ratio == pytest.approx(rows[0].ratio, rel=1e-10)
    assert rows[1].spatial == pytest.approx(2 * rows[0].spatial, rel=1e-12)
