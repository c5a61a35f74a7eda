"""Fourier, Radon and Abel transforms on ``H^p`` and their inverses.

Functions on ``H^p`` are stored as radial profiles of harmonic
coefficients: ``f(t, b) = sum_j f_j(t) Y_j(b)`` with the K-type blocks of
:mod:`hyperharm.ktypes`.  Every transform acts on one coefficient at a
time through the Funk-Hecke formula, with the kernel
``Psi_l(nu, t)`` of :func:`hyperharm.spherical.eisenstein_radial`.

Normalizations
--------------
* ``dx = |S^{p-1}| sinh(t)^n dt db`` with ``db`` the probability measure.
* Fourier transform ``f^(nu, b) = int f(x) exp((-nu + rho) A(x, b)) dx``.
* Radon transform ``Rf(t, b) = exp(rho t) int_N f(k a_t n) dn`` with
  ``dn`` Lebesgue measure on ``R^{p-1}``.  This makes ``f^ = F(Rf)``
  with constant 1.
* Inversion and Plancherel constants are not hard coded: they come from
  a :class:`CalibrationRecord` fitted on a reference bump.
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import CubicSpline

from .geometry import ModelParams, sphere_area
from .ktypes import (
    DEFAULT_LMAX,
    BoundaryFunction,
    KTypeIndex,
    SymmetryError,
    SymmetryReport,
    check_pdelta_reflection,
    extend_from_base,
    trace_map,
)
from .numerics import (
    compensated_sum,
    gauss_legendre,
    gregory,
    check_finite,
)
from .parallel import chunked_map
from .spherical import eisenstein_table, plancherel_density, zonal_polynomial

__all__ = [
    "DivergentWeightError",
    "MissingSupportError",
    "UncalibratedError",
    "InstabilityError",
    "RadialGrid",
    "SpectralGrid",
    "Grids",
    "bump_profile",
    "smooth_bump_profile",
    "SpatialFunction",
    "SpectralFunction",
    "RadonFunction",
    "DeltaSpectralFunction",
    "AbelFunction",
    "helgason_fourier",
    "inverse_helgason",
    "radon",
    "euclid_fourier",
    "euclid_inverse",
    "delta_spherical",
    "inverse_delta_spherical",
    "generalized_abel",
    "inverse_generalized_abel",
    "spectral_energy",
    "delta_spectral_energy",
    "check_symmetry",
    "CalibrationRecord",
    "CalibrationRegistry",
    "DEFAULT_REGISTRY",
    "calibrate_plancherel",
    "analytic_inversion_constant",
]


class DivergentWeightError(ArithmeticError):
    """The exponentially weighted integrand is not negligible at the grid edge."""


class MissingSupportError(ValueError):
    """A compact-support radius is required but was not given."""


class UncalibratedError(LookupError):
    """No calibration record exists for this dimension and grid."""


class InstabilityError(ArithmeticError):
    """Held-out Plancherel ratios disagree beyond tolerance."""


# ---------------------------------------------------------------------------
# Grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Uniform radial grid ``t = 0, dt, ..., t_max``."""

    t_max: float = 12.0
    dt: float = 1.0 / 256

    @property
    def n(self) -> int:
        return int(round(self.t_max / self.dt)) + 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.n) * self.dt

    @property
    def line(self) -> np.ndarray:
        """Symmetric grid on ``[-t_max, t_max]`` for Radon-side functions."""
        k = np.arange(-(self.n - 1), self.n)
        return k * self.dt

    def weights(self, n_used=None) -> np.ndarray:
        n_used = self.n if n_used is None else n_used
        return gregory(0.0, (n_used - 1) * self.dt, n=n_used - 1).weights


@dataclass(frozen=True)
class SpectralGrid:
    """Symmetric spectral grid ``lambda in [-lambda_max, lambda_max]``.

    Tube lines sit at ``Re nu in {-epsilon rho, 0, epsilon rho}``.
    """

    lambda_max: float = 64.0
    dlambda: float = 1.0 / 16
    epsilon: float = 0.0

    @property
    def n_half(self) -> int:
        return int(round(self.lambda_max / self.dlambda)) + 1

    @property
    def half(self) -> np.ndarray:
        return np.arange(self.n_half) * self.dlambda

    @property
    def lambdas(self) -> np.ndarray:
        k = np.arange(-(self.n_half - 1), self.n_half)
        return k * self.dlambda

    def sigmas(self, mp: ModelParams) -> tuple:
        if self.epsilon == 0:
            return (0.0,)
        s = self.epsilon * mp.rho
        return (-s, 0.0, s)

    def half_weights(self) -> np.ndarray:
        # spectral integrands are even in lambda, so lambda = 0 is left uncorrected
        return gregory(0.0, self.lambda_max, n=self.n_half - 1, ends="right").weights

    def line_weights(self) -> np.ndarray:
        n = 2 * self.n_half - 2
        return gregory(-self.lambda_max, self.lambda_max, n=n).weights


@dataclass(frozen=True)
class Grids:
    radial: RadialGrid = field(default_factory=RadialGrid)
    spectral: SpectralGrid = field(default_factory=SpectralGrid)

    def digest(self) -> str:
        """Hash of the grid parameters that the inversion constant depends on."""
        payload = json.dumps(
            {
                "t_max": self.radial.t_max,
                "dt": self.radial.dt,
                "lambda_max": self.spectral.lambda_max,
                "dlambda": self.spectral.dlambda,
            },
            sort_keys=True,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


# ---------------------------------------------------------------------------
# Function containers
# ---------------------------------------------------------------------------

def bump_profile(radius, power=3, center=0.0, degree=0):
    """``(t / radius)^degree max(0, 1 - ((t - center) / radius)^2)^power``.

    A function of K-type degree ``l`` is smooth at the origin only if its
    radial profile vanishes like ``t^l``; pass ``degree=l`` for those.
    """

    def profile(t):
        t = np.asarray(t, dtype=float)
        s = (t - center) / radius
        out = np.where(np.abs(s) < 1.0, np.clip(1.0 - s * s, 0.0, None) ** power, 0.0)
        if degree:
            out = out * (t / radius) ** degree
        return out

    profile.support = center + radius
    profile.ident = f"bump(R={radius:g},k={power},c={center:g},l={degree})"
    return profile


def smooth_bump_profile(radius, center=0.0, degree=0, sharpness=1.0):
    """``(t / radius)^degree exp(a - a / (1 - ((t - center) / radius)^2))``, a C-infinity bump.

    Peak value 1 at ``t = center`` (for ``degree = 0``).
    """

    def profile(t):
        t = np.asarray(t, dtype=float)
        s = (t - center) / radius
        inside = np.abs(s) < 1.0
        gap = np.where(inside, 1.0 - s * s, 1.0)
        out = np.where(inside, np.exp(sharpness - sharpness / gap), 0.0)
        if degree:
            out = out * (t / radius) ** degree
        return out

    profile.support = center + radius
    profile.ident = f"smooth_bump(R={radius:g},a={sharpness:g},c={center:g},l={degree})"
    return profile


@dataclass(frozen=True)
class SpatialFunction:
    """Function on ``H^p`` as radial profiles of harmonic coefficients.

    Attributes
    ----------
    mp : ModelParams
    grid : RadialGrid
    coefficients : dict
        ``label -> array (dim, n_t)`` on ``grid.t``.
    support : float or None
        Radius outside which the function vanishes.
    profiles : dict or None
        ``label -> (vector (dim,), callable)`` exact description, used by
        the Radon transform off the grid.
    """

    mp: ModelParams
    grid: RadialGrid
    coefficients: dict
    support: float | None = None
    profiles: dict | None = None
    lmax: int = DEFAULT_LMAX

    def __post_init__(self):
        for label, c in self.coefficients.items():
            if np.shape(c)[-1] != self.grid.n:
                raise ValueError(f"coefficient block {label} does not match the radial grid")
            check_finite(c, "spatial coefficients")
        if self.support is not None:
            mask = self.grid.t > self.support + 1e-12
            for c in self.coefficients.values():
                if np.any(np.abs(np.asarray(c)[..., mask]) > 1e-12):
                    raise ValueError("function does not vanish beyond its support hint")

    @classmethod
    def from_profile(cls, mp, profile, delta: KTypeIndex | None = None, vector=None,
                     grid: RadialGrid | None = None, support=None):
        """``f(t, b) = profile(t) * sum_j vector_j Y_j(b)`` on the K-type `delta`."""
        grid = grid or RadialGrid()
        delta = delta or KTypeIndex(mp.p, 0)
        vec = np.ones(delta.dim) if vector is None else np.asarray(vector, dtype=complex)
        if vec.shape != (delta.dim,):
            raise ValueError("vector length must equal the K-type dimension")
        support = getattr(profile, "support", None) if support is None else support
        block = vec[:, None] * profile(grid.t)[None, :]
        return cls(mp, grid, {delta.label: block}, support, {delta.label: (vec, profile)})

    @property
    def t(self):
        return self.grid.t

    def scaled(self, factor):
        coeffs = {k: factor * v for k, v in self.coefficients.items()}
        profiles = None
        if self.profiles is not None:
            profiles = {k: (factor * vec, prof) for k, (vec, prof) in self.profiles.items()}
        return replace(self, coefficients=coeffs, profiles=profiles)

    def __add__(self, other):
        if other.grid != self.grid or other.mp != self.mp:
            raise ValueError("grids differ")
        coeffs = dict(self.coefficients)
        for k, v in other.coefficients.items():
            coeffs[k] = coeffs[k] + v if k in coeffs else v
        profiles = None
        if self.profiles is not None and other.profiles is not None and not set(self.profiles) & set(other.profiles):
            profiles = {**self.profiles, **other.profiles}
        support = None
        if self.support is not None and other.support is not None:
            support = max(self.support, other.support)
        return replace(self, coefficients=coeffs, support=support, profiles=profiles)

    def sub(self, other):
        return self + other.scaled(-1.0)

    def norm_sq(self, t_max=None) -> float:
        """``int_X |f|^2 dx`` (optionally restricted to ``t <= t_max``)."""
        n_used = self.grid.n if t_max is None else int(round(t_max / self.grid.dt)) + 1
        w = self.grid.weights(n_used)
        vol = np.sinh(self.grid.t[:n_used]) ** self.mp.n
        total = 0.0
        for label in sorted(self.coefficients):
            c = np.asarray(self.coefficients[label])[..., :n_used]
            total += float(np.real(compensated_sum((np.abs(c) ** 2).sum(axis=0) * vol * w)))
        return sphere_area(self.mp.p) * total

    def sup_beyond(self, radius) -> float:
        """``max |f_j(t)|`` over coefficients and grid radii ``t > radius``."""
        mask = self.grid.t > radius
        vals = [np.max(np.abs(np.asarray(c)[..., mask]), initial=0.0) for c in self.coefficients.values()]
        return float(max(vals, default=0.0))

    def sup(self) -> float:
        vals = [np.max(np.abs(c), initial=0.0) for c in self.coefficients.values()]
        return float(max(vals, default=0.0))

    def evaluate(self, t_index, points):
        """Values at grid radius ``t[t_index]`` and boundary `points`."""
        from .ktypes import harmonic_block

        pts = np.atleast_2d(points)
        out = np.zeros(pts.shape[0], dtype=complex)
        for label, c in self.coefficients.items():
            basis = harmonic_block(KTypeIndex(self.mp.p, label), pts)
            out += np.asarray(c)[:, t_index] @ basis
        return out


@dataclass(frozen=True)
class SpectralFunction:
    """Function of ``(nu, b)`` on tube lines ``sigma + i lambda``.

    ``coefficients[label]`` has shape ``(dim, n_sigma, n_lambda)`` over
    ``grid.lambdas`` (symmetric) and the tuple `sigmas`.
    """

    mp: ModelParams
    grid: SpectralGrid
    sigmas: tuple
    coefficients: dict
    lmax: int = DEFAULT_LMAX
    last_symmetry: object = None

    @property
    def nus(self):
        return np.asarray(self.sigmas)[:, None] + 1j * self.grid.lambdas[None, :]

    def line(self, sigma=0.0):
        idx = _sigma_index(self.sigmas, sigma)
        return {k: v[:, idx, :] for k, v in self.coefficients.items()}


@dataclass(frozen=True)
class RadonFunction:
    """Function of ``(t, b)``, ``t`` on the symmetric line of `grid`.

    ``coefficients[label]`` has shape ``(dim, 2 n - 1)``.
    """

    mp: ModelParams
    grid: RadialGrid
    coefficients: dict
    lmax: int = DEFAULT_LMAX

    @property
    def t(self):
        return self.grid.line


@dataclass(frozen=True)
class DeltaSpectralFunction:
    """``h(nu)`` in ``Hom(V_delta, V_delta^M)``: one row of length ``dim`` per ``nu``.

    ``rows`` has shape ``(dim, n_sigma, n_lambda)``.
    """

    delta: KTypeIndex
    mp: ModelParams
    grid: SpectralGrid
    sigmas: tuple
    rows: np.ndarray
    last_symmetry: object = None

    @property
    def nus(self):
        return np.asarray(self.sigmas)[:, None] + 1j * self.grid.lambdas[None, :]

    def pdelta_reflection(self, tol=1e-8):
        return check_pdelta_reflection(self.rows, self.nus, self.delta, self.mp, tol)


@dataclass(frozen=True)
class AbelFunction:
    """Row-valued function of ``t`` on the symmetric line: ``rows`` is ``(dim, 2 n - 1)``."""

    delta: KTypeIndex
    mp: ModelParams
    grid: RadialGrid
    rows: np.ndarray

    @property
    def t(self):
        return self.grid.line


def _sigma_index(sigmas, sigma):
    for i, s in enumerate(sigmas):
        if abs(s - sigma) < 1e-12:
            return i
    raise KeyError(f"no tube line at Re nu = {sigma}")


# ---------------------------------------------------------------------------
# Radial Fourier transform
# ---------------------------------------------------------------------------

_ROW_UNIT = 256


def _used_rows(blocks, grid: RadialGrid, support):
    """Radial rows that carry the function, rounded up to a multiple of 256."""
    if support is not None:
        last = min(grid.n - 1, int(math.ceil(support / grid.dt)))
    else:
        peak = max((float(np.max(np.abs(b), initial=0.0)) for b in blocks), default=0.0)
        if peak == 0.0:
            return 1
        nz = np.zeros(grid.n, dtype=bool)
        for b in blocks:
            nz |= np.any(np.abs(b) > 1e-18 * peak, axis=0)
        last = int(np.nonzero(nz)[0][-1])
    n_used = min(grid.n, -(-(last + 1) // _ROW_UNIT) * _ROW_UNIT + 1)
    return max(n_used, min(grid.n, 2 * 8 + 1))


def _check_decay(blocks, grid, n_used, mp, sigma_abs):
    """Reject functions whose tube-weighted integrand has not decayed at ``t_max``."""
    if n_used < grid.n:
        return
    t = grid.t
    env = np.exp((sigma_abs + mp.rho) * t) * 1.0
    worst_edge = 0.0
    worst = 0.0
    for b in blocks:
        mag = np.max(np.abs(b), axis=0) * env * np.exp(-2 * mp.rho * t) * np.sinh(t) ** mp.n
        worst = max(worst, float(np.max(mag)))
        worst_edge = max(worst_edge, float(mag[-1]))
    if worst > 0 and worst_edge > 1e-10 * worst:
        raise DivergentWeightError(
            f"weighted integrand at t_max is {worst_edge / worst:.2e} of its peak; "
            "the function does not decay fast enough for this tube"
        )


def _radial_forward(blocks_by_degree, mp, grid: RadialGrid, sgrid: SpectralGrid, sigmas, support):
    """``|S| int f(t) Psi_l(-nu, t) sinh^n t dt`` for all blocks and tube lines.

    ``blocks_by_degree`` maps degree ``l`` to an array ``(rows, n_t)``.
    Returns the same mapping with arrays ``(rows, n_sigma, n_lambda)``.
    """
    all_blocks = list(blocks_by_degree.values())
    n_used = _used_rows(all_blocks, grid, support)
    sig_max = max(abs(s) for s in sigmas)
    _check_decay(all_blocks, grid, n_used, mp, sig_max)
    w = grid.weights(n_used) * np.sinh(grid.t[:n_used]) ** mp.n * sphere_area(mp.p)
    nh = sgrid.n_half
    out = {}
    for ell, blk in blocks_by_degree.items():
        data = np.asarray(blk, dtype=complex)[:, :n_used] * w
        res = np.empty((data.shape[0], len(sigmas), 2 * nh - 1), dtype=complex)
        for si, sig in enumerate(sigmas):
            # Psi(-sigma - i lam) = conj(Psi(-sigma + i lam))
            table = eisenstein_table(mp, ell, -sig, sgrid.dlambda, nh, grid.dt, n_used)
            plus = _ordered_matmul(data, table.conj())    # lambda >= 0
            minus = _ordered_matmul(data, table)          # lambda <= 0
            res[:, si, nh - 1:] = plus
            res[:, si, : nh - 1] = minus[:, :0:-1]
        out[ell] = res
    return out


def _ordered_matmul(data, table):
    """``data @ table`` accumulated radius by radius in a fixed order."""
    # chunks of radii are reduced separately and then summed in order, so
    # the result does not depend on the worker count
    n = data.shape[1]
    chunk = 512
    parts = chunked_map(lambda a, b: data[:, a:b] @ table[a:b], n, min_chunk=chunk)
    if len(parts) == 1:
        return parts[0]
    return compensated_sum(np.stack(parts), axis=0)


def _radial_inverse(spectra_by_degree, mp, sgrid: SpectralGrid, grid: RadialGrid, n_out, constant):
    """``c int_0^Lambda h(i lam) Psi_l(i lam, t) |c(i lam)|^-2 d lam`` on ``n_out`` radii."""
    nh = sgrid.n_half
    wl = sgrid.half_weights() * plancherel_density(sgrid.half, mp)
    out = {}
    for ell, spec in spectra_by_degree.items():
        spec = np.asarray(spec)[:, nh - 1:] * wl
        table = eisenstein_table(mp, ell, 0.0, sgrid.dlambda, nh, grid.dt, n_out)
        out[ell] = constant * (spec @ table.T)
    return out


def _blocks_by_degree(coefficients, p):
    """Group coefficient rows by harmonic degree; returns (grouped, index map)."""
    grouped = {}
    index = []
    for label in sorted(coefficients):
        ell = KTypeIndex(p, label).degree
        rows = np.asarray(coefficients[label])
        start = grouped[ell].shape[0] if ell in grouped else 0
        grouped[ell] = rows if ell not in grouped else np.concatenate([grouped[ell], rows])
        index.append((label, ell, start, start + rows.shape[0]))
    return grouped, index


def helgason_fourier(f: SpatialFunction, grid: SpectralGrid | None = None, sigmas=None) -> SpectralFunction:
    """``f^(nu, b) = int_X f(x) exp((-nu + rho) A(x, b)) dx`` on tube lines.

    Each harmonic coefficient ``f_j Y_j`` maps to ``h_j(nu) Y_j`` with
    ``h_j(nu) = |S^{p-1}| int f_j(t) Psi_l(-nu, t) sinh^n t dt``.

    Raises
    ------
    DivergentWeightError
        If `f` is not compactly supported and its weighted integrand has not
        decayed by ``t_max`` on the outermost tube line.
    """
    grid = grid or SpectralGrid()
    sigmas = tuple(grid.sigmas(f.mp) if sigmas is None else sigmas)
    grouped, index = _blocks_by_degree(f.coefficients, f.mp.p)
    if not grouped:
        return SpectralFunction(f.mp, grid, sigmas, {}, f.lmax)
    spectra = _radial_forward(grouped, f.mp, f.grid, grid, sigmas, f.support)
    coeffs = {label: spectra[ell][a:b] for label, ell, a, b in index}
    return SpectralFunction(f.mp, grid, sigmas, coeffs, f.lmax)


def inverse_helgason(psi: SpectralFunction, radial: RadialGrid | None = None, t_max_out=None,
                     registry=None) -> SpatialFunction:
    """Reconstruct ``f`` from its transform on the line ``Re nu = 0``.

    ``f(x) = c int_0^Lambda int_B exp((i lam + rho) A(x, b)) f^(i lam, b) |c(i lam)|^-2 db d lam``
    with ``c`` from the calibration record of ``(p, grids)``.  Values are
    produced on ``[0, t_max_out]`` and zero beyond.
    """
    radial = radial or RadialGrid()
    const = _lookup(psi.mp, Grids(radial, psi.grid), registry).constant_inversion
    n_out = radial.n if t_max_out is None else min(radial.n, int(round(t_max_out / radial.dt)) + 1)
    line = psi.line(0.0)
    grouped, index = _blocks_by_degree(line, psi.mp.p)
    rec = _radial_inverse(grouped, psi.mp, psi.grid, radial, n_out, const) if grouped else {}
    coeffs = {}
    for label, ell, a, b in index:
        block = np.zeros((b - a, radial.n), dtype=complex)
        block[:, :n_out] = rec[ell][a:b]
        coeffs[label] = block
    return SpatialFunction(psi.mp, radial, coeffs, None, None, psi.lmax)


def spectral_energy(psi: SpectralFunction) -> float:
    """``int_0^Lambda sum_j |f^_j(i lam)|^2 |c(i lam)|^-2 d lam`` (no constant)."""
    nh = psi.grid.n_half
    wl = psi.grid.half_weights() * plancherel_density(psi.grid.half, psi.mp)
    total = 0.0
    for label in sorted(psi.coefficients):
        spec = psi.line(0.0)[label][:, nh - 1:]
        total += float(compensated_sum((np.abs(spec) ** 2).sum(axis=0) * wl))
    return total


# ---------------------------------------------------------------------------
# Radon transform and the Euclidean Fourier transform
# ---------------------------------------------------------------------------

def _profile_callables(f: SpatialFunction):
    """Exact profiles where known, cubic splines of the grid data otherwise."""
    if f.profiles is not None and set(f.profiles) == set(f.coefficients):
        return {label: (vec, prof) for label, (vec, prof) in f.profiles.items()}
    out = {}
    for label, c in f.coefficients.items():
        c = np.asarray(c)
        spline = CubicSpline(f.grid.t, c, axis=1)
        out[label] = (None, lambda t, s=spline, cmax=f.grid.t_max: np.where(
            np.asarray(t)[None, :] <= cmax, s(np.minimum(t, cmax)), 0.0))
    return out


def _radon_degree(profile, ell, t_values, support, mp, n_r):
    """``exp(rho t) |S^{p-2}| int_0^{r_max} f(d(r)) P_l(cos theta(r)) r^{p-2} dr``.

    ``d(r)`` is the distance of ``a_t n_x . o`` from the origin for
    ``|x| = r`` and ``theta(r)`` its angle to ``e_p``.  The integral stops
    where ``d(r) = support``, so values vanish identically for
    ``|t| >= support``.
    """
    p = mp.p
    area = sphere_area(p - 1)
    rule = gauss_legendre(n_r, 0.0, 1.0)
    res = []
    cosh_r = math.cosh(support)
    for t in t_values:
        gap = cosh_r - math.cosh(t)
        if gap <= 0:
            res.append(None)
            continue
        r_max = math.sqrt(2.0 * math.exp(-t) * gap)
        r = r_max * rule.nodes
        w = r_max * rule.weights
        # half distance from sinh^2(d/2) = sinh^2(t/2) + e^t r^2 / 4
        half = np.arcsinh(np.sqrt(math.sinh(0.5 * t) ** 2 + 0.25 * math.exp(t) * r * r))
        d = 2.0 * half
        if ell:
            e2t = math.exp(2.0 * t)
            num = e2t * (r * r + 1.0) - 1.0
            den = e2t * r * r + (math.exp(t) + 1.0) ** 2
            radius = np.tanh(half)
            with np.errstate(invalid="ignore", divide="ignore"):
                cth = np.where(radius > 0, num / den / radius, 1.0)
            ang = zonal_polynomial(ell, p, np.clip(cth, -1.0, 1.0))
        else:
            ang = 1.0
        vals = np.atleast_2d(profile(d))  # (rows, n_r)
        res.append(math.exp(mp.rho * t) * area * (vals * (ang * w * r ** (p - 2))).sum(axis=1))
    return res


def radon(f: SpatialFunction, n_r=256) -> RadonFunction:
    """``Rf(t, b) = exp(rho t) int_N f(k a_t n) dn`` on the symmetric ``t`` line.

    For ``f = f_j(t) Y_j(b)`` this is ``a_j(t) Y_j(b)`` where ``a_j`` is an
    integral over ``R^{p-1}`` in polar coordinates; the angular part
    reduces to the zonal harmonic by rotation invariance about ``e_p``.

    Raises
    ------
    MissingSupportError
        If `f` carries no support radius.
    """
    if f.support is None:
        raise MissingSupportError("the Radon transform needs a support radius")
    tline = f.grid.line
    active = np.nonzero(np.abs(tline) < f.support)[0]
    funcs = _profile_callables(f)
    coeffs = {}
    for label in sorted(f.coefficients):
        ell = KTypeIndex(f.mp.p, label).degree
        vec, prof = funcs[label]
        if vec is not None:
            scalar = lambda d, pr=prof: pr(d)[None, :]
        else:
            scalar = prof
        ts = tline[active]
        parts = chunked_map(lambda a, b: _radon_degree(scalar, ell, ts[a:b], f.support, f.mp, n_r), ts.size)
        vals = [v for part in parts for v in part]
        rows = 1 if vec is not None else np.asarray(f.coefficients[label]).shape[0]
        block = np.zeros((rows, tline.size), dtype=complex)
        for i, v in zip(active, vals):
            if v is not None:
                block[:, i] = v
        if vec is not None:
            block = vec[:, None] * block
        coeffs[label] = block
    return RadonFunction(f.mp, f.grid, coeffs, f.lmax)


def _line_support(blocks, tline):
    peak = max((float(np.max(np.abs(b), initial=0.0)) for b in blocks), default=0.0)
    if peak == 0.0:
        return np.zeros(tline.size, dtype=bool), peak
    nz = np.zeros(tline.size, dtype=bool)
    for b in blocks:
        nz |= np.any(np.abs(b) > 0.0, axis=0)
    return nz, peak


def _euclid_forward(blocks, tline, dt, sgrid: SpectralGrid, sigmas):
    """``int phi(t) exp(-nu t) dt`` for each row of each block."""
    nz, peak = _line_support(blocks, tline)
    if peak == 0.0:
        return [np.zeros((np.asarray(b).shape[0], len(sigmas), sgrid.lambdas.size), dtype=complex)
                for b in blocks]
    idx = np.nonzero(nz)[0]
    lo, hi = max(0, idx[0] - 1), min(tline.size - 1, idx[-1] + 1)
    # pad to a symmetric window so the Gregory corrections land on zeros when possible
    t = tline[lo:hi + 1]
    w = gregory(t[0], t[-1], n=t.size - 1).weights
    for sig in sigmas:
        if sig == 0:
            continue
        for b in blocks:
            mag = np.max(np.abs(np.asarray(b)[:, lo:hi + 1]), axis=0) * np.exp(abs(sig) * np.abs(t))
            if mag[0] > 1e-10 * np.max(mag) * (1 if lo > 0 else 1) and lo == 0:
                raise DivergentWeightError("cosh-weighted integrand does not decay on this tube line")
            if mag[-1] > 1e-10 * np.max(mag) and hi == tline.size - 1:
                raise DivergentWeightError("cosh-weighted integrand does not decay on this tube line")
    lam = sgrid.lambdas
    phase = np.exp(-1j * np.outer(t, lam))  # (n_t, n_lambda)
    out = []
    for b in blocks:
        data = np.asarray(b, dtype=complex)[:, lo:hi + 1]
        res = np.empty((data.shape[0], len(sigmas), lam.size), dtype=complex)
        for si, sig in enumerate(sigmas):
            weighted = data * (w * np.exp(-sig * t))
            res[:, si, :] = _ordered_matmul(weighted, phase)
        out.append(res)
    return out


def euclid_fourier(phi, grid: SpectralGrid | None = None, sigmas=None):
    """Classical transform ``F phi(nu) = int_R phi(t) exp(-nu t) dt``.

    Accepts a :class:`RadonFunction` (returns :class:`SpectralFunction`) or
    an :class:`AbelFunction` (returns :class:`DeltaSpectralFunction`).
    """
    grid = grid or SpectralGrid()
    sigmas = tuple(grid.sigmas(phi.mp) if sigmas is None else sigmas)
    if isinstance(phi, AbelFunction):
        (res,) = _euclid_forward([phi.rows], phi.t, phi.grid.dt, grid, sigmas)
        return DeltaSpectralFunction(phi.delta, phi.mp, grid, sigmas, res)
    labels = sorted(phi.coefficients)
    res = _euclid_forward([phi.coefficients[k] for k in labels], phi.t, phi.grid.dt, grid, sigmas)
    return SpectralFunction(phi.mp, grid, sigmas, dict(zip(labels, res)), phi.lmax)


def _euclid_backward(spec, sgrid: SpectralGrid, sigma, tline):
    """``(1 / 2 pi) int psi(sigma + i lam) exp((sigma + i lam) t) d lam``."""
    lam = sgrid.lambdas
    w = sgrid.line_weights() / (2.0 * math.pi)
    phase = np.exp(1j * np.outer(lam, tline)) * np.exp(sigma * tline)[None, :]
    return (np.asarray(spec) * w) @ phase


def euclid_inverse(psi, radial: RadialGrid | None = None, sigma=0.0):
    """Inverse classical transform along the contour ``Re nu = sigma``."""
    radial = radial or RadialGrid()
    tline = radial.line
    if isinstance(psi, DeltaSpectralFunction):
        idx = _sigma_index(psi.sigmas, sigma)
        rows = _euclid_backward(psi.rows[:, idx, :], psi.grid, sigma, tline)
        return AbelFunction(psi.delta, psi.mp, radial, rows)
    idx = _sigma_index(psi.sigmas, sigma)
    coeffs = {k: _euclid_backward(v[:, idx, :], psi.grid, sigma, tline) for k, v in psi.coefficients.items()}
    return RadonFunction(psi.mp, radial, coeffs, psi.lmax)


# ---------------------------------------------------------------------------
# delta-spherical transform and the generalized Abel transform
# ---------------------------------------------------------------------------

def _dual_block(f, delta: KTypeIndex):
    """Coefficients of `f` on the contragredient block, shape ``(dim, ...)``."""
    dual = delta.contragredient
    c = f.coefficients.get(dual.label)
    return c


def delta_spherical(f: SpatialFunction, delta: KTypeIndex, grid: SpectralGrid | None = None,
                    sigmas=None) -> DeltaSpectralFunction:
    """``H^delta f(nu) = d int_X f(x) Phi_{-conj(nu), delta}(x)^* dx``.

    Only the contragredient block of `f` contributes; the result is the
    row ``sqrt(d) h_j(nu)`` where ``h_j`` is the radial transform of the
    ``j``-th coefficient.
    """
    grid = grid or SpectralGrid()
    sigmas = tuple(grid.sigmas(f.mp) if sigmas is None else sigmas)
    c = _dual_block(f, delta)
    d = delta.dim
    if c is None:
        return DeltaSpectralFunction(delta, f.mp, grid, sigmas,
                                     np.zeros((d, len(sigmas), grid.lambdas.size), dtype=complex))
    spectra = _radial_forward({delta.degree: np.asarray(c)}, f.mp, f.grid, grid, sigmas, f.support)
    return DeltaSpectralFunction(delta, f.mp, grid, sigmas, math.sqrt(d) * spectra[delta.degree])


def inverse_delta_spherical(h: DeltaSpectralFunction, radial: RadialGrid | None = None, t_max_out=None,
                            registry=None) -> SpatialFunction:
    """``f(x) = c Tr int_0^Lambda Phi_{i lam, delta}(x) h(i lam) |c(i lam)|^-2 d lam``.

    The result lives on the contragredient K-type.
    """
    radial = radial or RadialGrid()
    const = _lookup(h.mp, Grids(radial, h.grid), registry).constant_inversion
    n_out = radial.n if t_max_out is None else min(radial.n, int(round(t_max_out / radial.dt)) + 1)
    idx = _sigma_index(h.sigmas, 0.0)
    d = h.delta.dim
    rec = _radial_inverse({h.delta.degree: h.rows[:, idx, :]}, h.mp, h.grid, radial, n_out, const)
    block = np.zeros((d, radial.n), dtype=complex)
    block[:, :n_out] = rec[h.delta.degree] / math.sqrt(d)
    return SpatialFunction(h.mp, radial, {h.delta.contragredient.label: block})


def delta_spectral_energy(h: DeltaSpectralFunction) -> float:
    """``(1 / d) int_0^Lambda ||h(i lam)||_HS^2 |c(i lam)|^-2 d lam`` (no constant)."""
    nh = h.grid.n_half
    idx = _sigma_index(h.sigmas, 0.0)
    wl = h.grid.half_weights() * plancherel_density(h.grid.half, h.mp)
    spec = h.rows[:, idx, nh - 1:]
    return float(compensated_sum((np.abs(spec) ** 2).sum(axis=0) * wl)) / h.delta.dim


def generalized_abel(f: SpatialFunction, delta: KTypeIndex, n_r=256) -> AbelFunction:
    """``T f(t) = exp(rho t) int_{K x N} f(k a_t n) delta(k^{-1}) dk dn``.

    Realized as the base-point row of the equivariant projection of the
    Radon transform: ``sqrt(d) a_j(t)`` for the contragredient block.
    """
    if f.support is None:
        raise MissingSupportError("the generalized Abel transform needs a support radius")
    dual = delta.contragredient
    d = delta.dim
    if dual.label not in f.coefficients:
        return AbelFunction(delta, f.mp, f.grid, np.zeros((d, f.grid.line.size), dtype=complex))
    part = replace(f, coefficients={dual.label: f.coefficients[dual.label]},
                   profiles=({dual.label: f.profiles[dual.label]}
                             if f.profiles and dual.label in f.profiles else None))
    rf = radon(part, n_r=n_r)
    return AbelFunction(delta, f.mp, f.grid, math.sqrt(d) * rf.coefficients[dual.label])


def inverse_generalized_abel(phi: AbelFunction, grid: SpectralGrid | None = None, t_max_out=None,
                             registry=None, reflection_tol=1e-6) -> SpatialFunction:
    """``T^{-1} = (H^delta)^{-1} F``.

    Raises
    ------
    SymmetryError
        If the classical transform of `phi` violates the symmetry relation
        by more than `reflection_tol` (relative).
    """
    grid = grid or SpectralGrid()
    h = euclid_fourier(phi, grid, sigmas=(0.0,))
    report = h.pdelta_reflection(reflection_tol)
    if not report.passed:
        raise SymmetryError(f"input violates the p_delta symmetry: relative residual {report.relative:.2e}")
    return inverse_delta_spherical(h, phi.grid, t_max_out=t_max_out, registry=registry)


# ---------------------------------------------------------------------------
# Symmetry conditions
# ---------------------------------------------------------------------------

SC_SAMPLE_LAMBDAS = (0.5, 1.0, 2.0, 4.0, 8.0)


def _grid_index(psi, nu):
    si = _sigma_index(psi.sigmas, float(np.real(nu)))
    li = int(round(float(np.imag(nu)) / psi.grid.dlambda)) + psi.grid.n_half - 1
    if abs(psi.grid.lambdas[li] - np.imag(nu)) > 1e-12:
        raise ValueError(f"nu = {nu} is not a grid point")
    return si, li


def check_symmetry(psi, mode="pdelta", points=None, lambdas=SC_SAMPLE_LAMBDAS, tol=1e-8) -> SymmetryReport:
    """Symmetry residual of a transform output.

    Parameters
    ----------
    psi : SpectralFunction or DeltaSpectralFunction
    mode : {"pdelta", "SC-full"}
        ``pdelta`` compares ``p_delta(-nu) h(-nu)`` with ``p_delta(nu) h(nu)``
        over the whole grid.  ``SC-full`` compares the Poisson integrals of
        ``psi(nu, .)`` and ``psi(-nu, .)`` at the sample `points` for ``nu``
        on every tube line and ``Im nu`` in `lambdas`.  A row-valued input
        is first extended equivariantly and traced.

    Raises
    ------
    SymmetryError
        If the spectral grid is not symmetric under ``nu -> -nu``.
    """
    from .spherical import default_symmetry_points, sc_full_residual

    if mode == "pdelta":
        if not isinstance(psi, DeltaSpectralFunction):
            raise ValueError("pdelta mode needs a row-valued (delta) spectral function")
        return psi.pdelta_reflection(tol)
    if mode != "SC-full":
        raise ValueError("mode must be 'pdelta' or 'SC-full'")
    sig = np.asarray(psi.sigmas, dtype=float)
    if not np.allclose(np.sort(sig), np.sort(-sig), atol=1e-12):
        raise SymmetryError("spectral grid is not symmetric under nu -> -nu")
    points = points or default_symmetry_points(psi.mp)

    if isinstance(psi, DeltaSpectralFunction):
        def boundary_at(nu):
            si, li = _grid_index(psi, nu)
            return trace_map(extend_from_base(psi.rows[:, si, li], psi.delta))
    else:
        def boundary_at(nu):
            si, li = _grid_index(psi, nu)
            return BoundaryFunction(psi.mp.p, {k: v[:, si, li] for k, v in psi.coefficients.items()}, psi.lmax)

    nus = [s + 1j * lam for s in sig if s >= 0 for lam in lambdas]
    resid, scale = sc_full_residual(boundary_at, nus, points, psi.mp)
    return SymmetryReport("SC-full", resid, scale, tol)


# ---------------------------------------------------------------------------
# Calibration
# ---------------------------------------------------------------------------

def analytic_inversion_constant(mp: ModelParams) -> float:
    """``2^{n-1} / (pi |S^{p-1}|)``: the value the calibration should reproduce."""
    return 2.0 ** (mp.n - 1) / (math.pi * sphere_area(mp.p))


@dataclass(frozen=True)
class CalibrationRecord:
    p: int
    grid_hash: str
    constant_inversion: float
    constant_plancherel: float
    reference_bump_id: str
    n_measure_constant: float = 1.0
    held_out_ratios: tuple = ()

    @property
    def spread(self) -> float:
        if not self.held_out_ratios:
            return 0.0
        return max(self.held_out_ratios) - min(self.held_out_ratios)

    def to_json(self) -> str:
        data = asdict(self)
        data["held_out_ratios"] = list(self.held_out_ratios)
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        data["held_out_ratios"] = tuple(data.get("held_out_ratios", ()))
        return cls(**data)


class CalibrationRegistry:
    """In-memory store of calibration records, optionally mirrored to a directory."""

    def __init__(self, directory=None):
        self._records = {}
        self.directory = Path(directory) if directory else None

    def _path(self, p, digest):
        return self.directory / f"calibration-p{p}-{digest[:16]}.json"

    def put(self, record: CalibrationRecord):
        self._records[(record.p, record.grid_hash)] = record
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
            self._path(record.p, record.grid_hash).write_text(record.to_json() + "\n", encoding="utf-8")

    def get(self, p, digest):
        rec = self._records.get((p, digest))
        if rec is None and self.directory is not None:
            path = self._path(p, digest)
            if path.exists():
                rec = CalibrationRecord.from_json(path.read_text(encoding="utf-8"))
                self._records[(p, digest)] = rec
        return rec

    def clear(self):
        self._records.clear()


DEFAULT_REGISTRY = CalibrationRegistry(os.environ.get("HYPERHARM_CALIBRATION_DIR"))


def _lookup(mp, grids: Grids, registry=None) -> CalibrationRecord:
    registry = registry or DEFAULT_REGISTRY
    rec = registry.get(mp.p, grids.digest())
    if rec is None:
        raise UncalibratedError(f"no calibration for p={mp.p} on this grid; run calibrate_plancherel first")
    return rec


REFERENCE_BUMP = (2.0, 3)
HELD_OUT_BUMPS = ((1.0, 3), (1.5, 4), (2.5, 3), (3.0, 5), (4.0, 6))


def calibrate_plancherel(mp: ModelParams, grids: Grids | None = None, registry=None,
                         reference=REFERENCE_BUMP, held_out=HELD_OUT_BUMPS,
                         spread_tol=1e-2) -> CalibrationRecord:
    """Fit the inversion and Plancherel constants on one K-invariant reference bump.

    The Plancherel constant makes ``int |f0|^2`` equal to the spectral
    energy of the reference; the inversion constant is the least-squares
    scale of the unnormalized reconstruction.  Held-out bumps then give
    independent Plancherel ratios, which must agree to `spread_tol`.

    Raises
    ------
    InstabilityError
        If the held-out ratios spread more than `spread_tol`.
    """
    grids = grids or Grids()
    registry = registry or DEFAULT_REGISTRY
    sgrid = SpectralGrid(grids.spectral.lambda_max, grids.spectral.dlambda, 0.0)

    def energy_pair(radius, power):
        prof = bump_profile(radius, power)
        f = SpatialFunction.from_profile(mp, prof, grid=grids.radial)
        psi = helgason_fourier(f, sgrid, sigmas=(0.0,))
        return f, psi, f.norm_sq(), spectral_energy(psi)

    f0, psi0, n0, s0 = energy_pair(*reference)
    c_pl = n0 / s0
    grouped, _ = _blocks_by_degree(psi0.line(0.0), mp.p)
    raw = _radial_inverse(grouped, mp, sgrid, grids.radial, grids.radial.n, 1.0)[0][0].real
    target = np.asarray(f0.coefficients[0][0]).real
    w = grids.radial.weights() * np.sinh(grids.radial.t) ** mp.n
    c_inv = float(compensated_sum(w * raw * target) / compensated_sum(w * raw * raw))
    ratios = []
    for radius, power in held_out:
        _, _, n_i, s_i = energy_pair(radius, power)
        ratios.append(c_pl * s_i / n_i)
    record = CalibrationRecord(
        p=mp.p,
        grid_hash=grids.digest(),
        constant_inversion=c_inv,
        constant_plancherel=c_pl,
        reference_bump_id=bump_profile(*reference).ident,
        n_measure_constant=1.0,
        held_out_ratios=tuple(float(r) for r in ratios),
    )
    if record.spread > spread_tol:
        raise InstabilityError(f"held-out Plancherel ratios spread {record.spread:.2e}")
    registry.put(record)
    return record
