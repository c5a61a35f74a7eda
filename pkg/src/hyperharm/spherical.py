"""Spherical functions, Eisenstein integrals and the c-function.

Convention: ``phi_nu(x) = int_B exp((nu + rho) A(x, b)) db``.  The kernel
of the Fourier transform, ``exp((-nu + rho) A)``, therefore integrates to
``phi_{-nu}``.

Two independent routes evaluate radial quantities:

* :func:`spherical_fn` uses the Jacobi-function closed form through
  :func:`hyperharm.numerics.hyp2f1`;
* :func:`eisenstein_radial` integrates the Poisson kernel over the
  boundary with :func:`hyperharm.geometry.poisson_axis_rule`.  It also
  covers every K-type through the Funk-Hecke formula.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from collections import OrderedDict

import numpy as np
from scipy.special import eval_chebyt, eval_gegenbauer, eval_legendre

from .geometry import (
    HyperbolicPoint,
    ModelParams,
    alpha_nodes,
    axis_product_rule,
    north_pole,
    poisson_axis_rule,
    polar_distance,
    rotation_to_axis,
)
from .ktypes import BoundaryFunction, KTypeIndex, UnsupportedDimensionError, harmonic_block
from .numerics import gamma_ln, hyp2f1, rgamma
from .parallel import chunked_map

__all__ = [
    "SpectralParam",
    "spherical_fn",
    "zonal_polynomial",
    "eisenstein_radial",
    "eisenstein_table",
    "clear_table_cache",
    "EisensteinValue",
    "eisenstein",
    "harish_chandra_c",
    "plancherel_density",
    "poisson_integral",
    "fit_c_asymptotic",
    "phi0_envelope",
    "tube_envelope",
    "c_growth_slope",
    "default_symmetry_points",
    "sc_full_residual",
    "pdelta_ratio_fit",
]


@dataclass(frozen=True)
class SpectralParam:
    """Spectral parameter, optionally tagged with a tube half-width ``epsilon``."""

    nu: complex
    epsilon: float | None = None
    rho: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "nu", complex(self.nu))
        if self.epsilon is not None and self.rho is not None:
            if abs(self.nu.real) > self.epsilon * self.rho + 1e-14:
                raise ValueError("nu lies outside the tube |Re nu| <= epsilon rho")


def _as_nu(nu):
    return nu.nu if isinstance(nu, SpectralParam) else nu


def spherical_fn(nu, t, mp: ModelParams):
    """``phi_nu(a_t)`` via ``2F1((rho+nu)/2, (rho-nu)/2; (n+1)/2; -sinh^2 t)``.

    Vectorized over `t`; `nu` is a scalar.
    """
    nu = complex(_as_nu(nu))
    rho = mp.rho
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    x = -np.sinh(t) ** 2
    out = hyp2f1(0.5 * (rho + nu), 0.5 * (rho - nu), 0.5 * (mp.n + 1), x)
    return out


def zonal_polynomial(ell, p, x):
    """Zonal harmonic of degree `ell` on ``S^{p-1}`` normalized to 1 at the pole."""
    x = np.asarray(x, dtype=float)
    if ell == 0:
        return np.ones_like(x)
    if p == 2:
        return eval_chebyt(ell, x)
    if p == 3:
        return eval_legendre(ell, x)
    lam = 0.5 * (p - 2)
    return eval_gegenbauer(ell, lam, x) / eval_gegenbauer(ell, lam, 1.0)


def eisenstein_radial(nu, t, ell, mp: ModelParams, n_alpha=None):
    """``Psi_l(nu, t) = int_B P_l(<b, e_p>) exp((nu + rho) A(a_t . o, b)) db``.

    ``P_l`` is the zonal harmonic of degree `ell`; ``Psi_0`` is the
    spherical function.  Vectorized over `nu` at a scalar `t`.
    """
    nu = np.asarray(_as_nu(nu), dtype=complex)
    if n_alpha is None:
        n_alpha = alpha_nodes(t, float(np.max(np.abs(nu), initial=0.0)), ell)
    cth, bracket, w = poisson_axis_rule(t, mp, n_alpha)
    wz = w * zonal_polynomial(ell, mp.p, cth) * np.exp(mp.rho * bracket)
    return np.exp(np.multiply.outer(nu, bracket)) @ wz


_BLOCK = 32
_TABLE_CACHE: "OrderedDict[tuple, np.ndarray]" = OrderedDict()
_TABLE_CACHE_SIZE = 8


def _table_rows(p, ell, sigma, dlam, n_lam, dt, start, stop):
    """Rows ``start..stop-1`` (radii ``i * dt``) of the kernel table.

    ``exp(i lambda_k A)`` with ``k = j B + m`` factors as
    ``exp(i j B dlam A) exp(i m dlam A)``, turning the sum over boundary
    nodes into one small matrix product per radius.
    """
    mp = ModelParams(p)
    lam_max = dlam * (n_lam - 1)
    n_blocks = -(-n_lam // _BLOCK)
    m = np.arange(_BLOCK)
    j = np.arange(n_blocks)
    out = np.empty((stop - start, n_blocks * _BLOCK), dtype=complex)
    for row, i in enumerate(range(start, stop)):
        t = i * dt
        nodes = alpha_nodes(t, abs(sigma) + lam_max, ell)
        cth, bracket, w = poisson_axis_rule(t, mp, nodes)
        q = w * zonal_polynomial(ell, p, cth) * np.exp((sigma + mp.rho) * bracket)
        fine = np.exp(1j * dlam * np.outer(bracket, m))
        coarse = q[None, :] * np.exp(1j * (_BLOCK * dlam) * np.outer(j, bracket))
        out[row] = (coarse @ fine).ravel()
    return out[:, :n_lam]


def clear_table_cache():
    """Drop all cached kernel tables."""
    _TABLE_CACHE.clear()


def eisenstein_table(mp: ModelParams, ell, sigma, dlam, n_lam, dt, n_t):
    """``Psi_l(sigma + i k dlam, i dt)`` for ``k < n_lam``, ``i < n_t``.

    Returns a read-only array of shape ``(n_t, n_lam)``.  Values for
    negative ``lambda`` follow from ``Psi(conj nu) = conj Psi(nu)``.
    Tables are cached and extended row-wise when more radii are requested.
    """
    key = (mp.p, int(ell), float(sigma), float(dlam), int(n_lam), float(dt))
    have = _TABLE_CACHE.get(key)
    if have is not None and have.shape[0] >= n_t:
        _TABLE_CACHE.move_to_end(key)
        return have[:n_t]
    start = 0 if have is None else have.shape[0]
    parts = chunked_map(lambda a, b: _table_rows(mp.p, int(ell), float(sigma), float(dlam), int(n_lam),
                                                 float(dt), start + a, start + b), n_t - start)
    new = np.concatenate(([have] if have is not None else []) + parts, axis=0)
    new.setflags(write=False)
    _TABLE_CACHE[key] = new
    _TABLE_CACHE.move_to_end(key)
    while len(_TABLE_CACHE) > _TABLE_CACHE_SIZE:
        _TABLE_CACHE.popitem(last=False)
    return new


@dataclass(frozen=True)
class EisensteinValue:
    """The ``d x d`` matrix of an Eisenstein integral at one point."""

    matrix: np.ndarray

    @property
    def first_column(self):
        return self.matrix[:, 0]


def _rotated_rule(x: HyperbolicPoint, mp: ModelParams, nu_abs, degree, n_azimuth):
    t = polar_distance(x)
    omega = x.coords[1] if x.model == "polar" else x.to_ball().coords[0]
    if np.linalg.norm(omega) == 0:
        omega = north_pole(mp.p)
    k = rotation_to_axis(omega)
    pts, bracket, w = axis_product_rule(t, mp, alpha_nodes(t, nu_abs, degree), n_azimuth)
    return (k @ pts.T).T, bracket, w


def poisson_integral(phi: BoundaryFunction, nu, x: HyperbolicPoint, mp: ModelParams, n_azimuth=None):
    """``int_B phi(b) exp((nu + rho) A(x, b)) db`` by boundary quadrature.

    The rule is centred on the direction of `x`, so the peak of the
    Poisson kernel is resolved at any distance.
    """
    nu = complex(_as_nu(nu))
    if mp.p not in (2, 3):
        raise UnsupportedDimensionError("boundary functions need p in {2, 3}")
    lmax = max([abs(label) for label in phi.coefficients] + [0])
    n_azimuth = n_azimuth or (2 * lmax + 8)
    pts, bracket, w = _rotated_rule(x, mp, abs(nu), lmax, n_azimuth)
    vals = phi.evaluate(pts)
    kern = np.exp((nu + mp.rho) * bracket) * w
    return np.tensordot(kern, vals, axes=([0], [0]))


def eisenstein(nu, x: HyperbolicPoint, delta: KTypeIndex, mp: ModelParams | None = None, n_azimuth=None):
    """``int_K exp((nu + rho) A(x, kM)) delta(k) dk`` by boundary quadrature.

    Averaging over ``M`` on the right projects onto the M-fixed vector, so
    only the first column is nonzero.  Its entries are
    ``int_B exp((nu + rho) A(x, b)) conj(Y_j(b)) db / sqrt(d)``.
    """
    mp = mp or ModelParams(delta.p)
    nu = complex(_as_nu(nu))
    d = delta.dim
    n_azimuth = n_azimuth or (2 * delta.degree + 8)
    pts, bracket, w = _rotated_rule(x, mp, abs(nu), delta.degree, n_azimuth)
    basis = harmonic_block(delta, pts)  # (d, N)
    kern = np.exp((nu + mp.rho) * bracket) * w
    col = (basis.conj() @ kern) / math.sqrt(d)
    mat = np.zeros((d, d), dtype=complex)
    mat[:, 0] = col
    return EisensteinValue(mat)


def harish_chandra_c(nu, mp: ModelParams):
    """``c(nu) = Gamma(2 rho) Gamma(nu) / (Gamma(rho) Gamma(nu + rho))``, so ``c(rho) = 1``."""
    nu = _as_nu(nu)
    rho = mp.rho
    return np.exp(gamma_ln(2 * rho) - gamma_ln(rho) + gamma_ln(nu) - gamma_ln(np.asarray(nu) + rho))


def plancherel_density(lam, mp: ModelParams):
    """``|c(i lambda)|^{-2}``; vanishes at ``lambda = 0``."""
    lam = np.asarray(lam, dtype=float)
    rho = mp.rho
    z = 1j * lam
    inv = np.exp(gamma_ln(rho) - gamma_ln(2 * rho) + gamma_ln(z + rho)) * rgamma(z)
    return np.abs(inv) ** 2


def fit_c_asymptotic(lam, mp: ModelParams, t_window=(15.0, 25.0), n_samples=81):
    """Recover ``c(i lambda)`` from the large-``t`` behaviour of ``phi_{i lambda}``.

    Fits ``exp(rho t) phi_{i lambda}(a_t) = c e^{i lambda t} + conj(c) e^{-i lambda t}``
    by least squares on `n_samples` radii in `t_window`.
    """
    t = np.linspace(*t_window, n_samples)
    y = np.exp(mp.rho * t) * spherical_fn(1j * lam, t, mp)
    # real least squares for (Re c, Im c)
    design = np.stack([2.0 * np.cos(lam * t), -2.0 * np.sin(lam * t)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y.real, rcond=None)
    return complex(coef[0], coef[1])


def phi0_envelope(mp: ModelParams, t):
    """Check ``exp(-rho t) < phi_0(a_t) <= C (1 + t) exp(-rho t)``.

    Returns ``(lower_holds, C)`` with ``C`` the smallest constant for the
    upper bound on the sample `t`.
    """
    t = np.asarray(t, dtype=float)
    phi = spherical_fn(0.0, t, mp).real
    lower = bool(np.all(phi > np.exp(-mp.rho * t)))
    const = float(np.max(phi * np.exp(mp.rho * t) / (1.0 + t)))
    return lower, const


def tube_envelope(mp: ModelParams, epsilon, t, lambdas):
    """Smallest ``C`` with ``|phi_nu(a_t)| <= C (1 + t) exp((epsilon - 1) rho t)``.

    The supremum runs over ``nu = +-epsilon rho + i lambda`` and the sample `t`.
    """
    t = np.asarray(t, dtype=float)
    worst = 0.0
    for sig in (-epsilon * mp.rho, epsilon * mp.rho):
        for lam in lambdas:
            vals = np.abs(spherical_fn(sig + 1j * lam, t, mp))
            ratio = vals / ((1.0 + t) * np.exp((epsilon - 1.0) * mp.rho * t))
            worst = max(worst, float(np.max(ratio)))
    return worst


def c_growth_slope(mp: ModelParams, lam_range=(10.0, 100.0), n=64):
    """Least-squares slope of ``log |c(i lambda)|^{-1}`` against ``log lambda``."""
    lam = np.geomspace(*lam_range, n)
    y = 0.5 * np.log(plancherel_density(lam, mp))
    slope, _ = np.polyfit(np.log(lam), y, 1)
    return float(slope)


# ---------------------------------------------------------------------------
# Symmetry checks
# ---------------------------------------------------------------------------

def default_symmetry_points(mp: ModelParams, radii=(0.5, 1.0, 2.0)):
    """Deterministic sample points at the given polar radii, off the base axis."""
    pts = []
    for i, t in enumerate(radii):
        omega = np.zeros(mp.p)
        omega[0] = math.cos(0.7 + i)
        omega[-1] = math.sin(0.7 + i)
        omega /= np.linalg.norm(omega)
        pts.append(HyperbolicPoint.polar(t, omega))
    return pts


def sc_full_residual(boundary_at, nus, points, mp: ModelParams):
    """Residual of the full symmetry condition at sampled ``(nu, x)``.

    ``max |int_B e^{(-nu + rho) A(x, b)} psi(-nu, b) db - int_B e^{(nu + rho) A(x, b)} psi(nu, b) db|``
    where ``boundary_at(nu)`` returns ``psi(nu, .)`` as a :class:`BoundaryFunction`.
    Returns ``(residual, scale)`` with ``scale`` the largest single integral.
    """
    resid = 0.0
    scale = 0.0
    for nu in np.atleast_1d(np.asarray(nus, dtype=complex)):
        plus, minus = boundary_at(nu), boundary_at(-nu)
        for x in points:
            a = complex(np.sum(poisson_integral(plus, nu, x, mp)))
            b = complex(np.sum(poisson_integral(minus, -nu, x, mp)))
            resid = max(resid, abs(a - b))
            scale = max(scale, abs(a), abs(b))
    return resid, scale


def pdelta_ratio_fit(delta: KTypeIndex, mp: ModelParams, nus=None, radii=(0.5, 1.0, 2.0), s_max=8):
    """Recover the degree ``s`` of ``p_delta`` from Eisenstein-integral ratios.

    For each candidate ``s`` the ratio ``Phi_{nu,delta}(a_t o) / Phi_{-nu,delta}(a_t o)``
    is compared with ``q_s(nu) / q_s(-nu)``, ``q_s(nu) = prod_{j<s} (nu + rho + j)``.
    Returns ``(s, residuals)`` where ``s`` minimizes the maximal relative
    residual and ``residuals[k]`` is the residual for ``s = k``.
    """
    if nus is None:
        nus = np.array([0.3 + 0.7j, 1.2 - 0.4j, 2.5 + 1.1j, -0.6 + 2.0j, 0.9 + 3.0j])
    nus = np.asarray(nus, dtype=complex)
    ratios = []
    for t in radii:
        x = HyperbolicPoint.polar(t, north_pole(mp.p))
        for nu in nus:
            num = eisenstein(nu, x, delta, mp).matrix[0, 0]
            den = eisenstein(-nu, x, delta, mp).matrix[0, 0]
            ratios.append((nu, num / den))
    residuals = []
    for s in range(s_max + 1):
        roots = [mp.rho + j for j in range(s)]
        worst = 0.0
        for nu, r in ratios:
            q_plus = np.prod([nu + root for root in roots]) if s else 1.0
            q_minus = np.prod([-nu + root for root in roots]) if s else 1.0
            target = q_plus / q_minus
            worst = max(worst, abs(r - target) / abs(target))
        residuals.append(worst)
    return int(np.argmin(residuals)), residuals
