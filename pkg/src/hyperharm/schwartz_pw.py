"""Schwartz seminorms, exponential type and the cutoff decomposition.

The cutoff decomposition splits a row-valued spectral function ``h`` of
K-type ``delta`` into a piece whose inverse transform is supported in the
ball of radius ``j`` and a remainder ``h_j`` that agrees with ``h``'s
inverse outside that ball:

    G   = F^{-1}( h(nu) / p_delta(-nu) )           (even in t)
    H_j = p_delta(-d/dt) [ (1 - omega_j) G ]
    h_j = F H_j,     f_j = T^{-1} H_j
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import sphere_rule
from .ktypes import (
    KTypeIndex,
    SymmetryError,
    casimir_eigenvalue,
    divide_pdelta,
    harmonic_block,
    pdelta,
)
from .numerics import NonFiniteError, Polynomial, fd_weights, gauss_legendre
from .spherical import spherical_fn
from .transforms import (
    AbelFunction,
    DeltaSpectralFunction,
    RadonFunction,
    RadialGrid,
    SpatialFunction,
    SpectralFunction,
    SpectralGrid,
    euclid_fourier,
    euclid_inverse,
    helgason_fourier,
    inverse_delta_spherical,
    inverse_helgason,
)

__all__ = [
    "SeminormSpec",
    "SeminormValue",
    "spatial_seminorm",
    "spectral_seminorm",
    "PWReport",
    "exponential_type",
    "helgason_evaluator",
    "paley_wiener_report",
    "CutoffSpec",
    "cutoff_omega",
    "CutoffResult",
    "cutoff_decompose",
    "root_quotient",
    "tube_holomorphy_residual",
    "continuity_report",
    "ContinuityRow",
]


@dataclass(frozen=True)
class SeminormSpec:
    """Parameters of a spatial or spectral seminorm.

    Attributes
    ----------
    side : {"spatial", "spectral"}
    lp : float
        Exponent ``p`` in ``(0, 2]`` of the ``L^p`` Schwartz space (spatial side).
    epsilon : float
        Tube half-width (spectral side).
    N : int
        Power of the polynomial weight.
    laplacian : int
        Power ``a`` of the Laplace-Beltrami operator.
    casimir : int
        Power ``b`` of the boundary Casimir operator.
    poly : Polynomial
        Differential polynomial in ``d/dnu`` (spectral side).
    """

    side: str
    lp: float = 2.0
    epsilon: float = 0.0
    N: int = 0
    laplacian: int = 0
    casimir: int = 0
    poly: Polynomial = field(default_factory=lambda: Polynomial((1.0,)))

    def __post_init__(self):
        if self.side not in ("spatial", "spectral"):
            raise ValueError("side must be 'spatial' or 'spectral'")
        if self.side == "spatial" and not (0 < self.lp <= 2):
            raise ValueError("lp must lie in (0, 2]")

    @classmethod
    def paired(cls, lp, **kwargs):
        """Spectral spec with ``epsilon = 2 / lp - 1`` matching an ``L^lp`` spatial spec."""
        return cls("spectral", lp=lp, epsilon=2.0 / lp - 1.0, **kwargs)


@dataclass(frozen=True)
class SeminormValue:
    """Grid supremum of a seminorm plus a bound for the part beyond the grid."""

    value: float
    tail_bound: float
    spec: SeminormSpec

    def row(self):
        s = self.spec
        return {
            "side": s.side,
            "lp": s.lp,
            "epsilon": s.epsilon,
            "N": s.N,
            "laplacian": s.laplacian,
            "casimir": s.casimir,
            "value": self.value,
            "tail_bound": self.tail_bound,
        }


def _boundary_sup(blocks, p, n_polar=24):
    """``sup_b |sum_j c_j(...) Y_j(b)|`` sampled on a boundary grid; blocks map label -> (dim, M)."""
    if p >= 4 or set(blocks) <= {0} and p != 2:
        return np.max(np.abs(np.concatenate([np.asarray(v) for v in blocks.values()])), axis=0)
    pts, _ = sphere_rule(p, n_polar)
    total = None
    for label, c in blocks.items():
        basis = harmonic_block(KTypeIndex(p, label), pts)  # (d, N)
        val = basis.T @ np.asarray(c)
        total = val if total is None else total + val
    return np.max(np.abs(total), axis=0)


def _apply_operators(f: SpatialFunction, spec: SeminormSpec, grid: SpectralGrid | None, registry):
    blocks = {k: np.asarray(v) for k, v in f.coefficients.items()}
    if spec.casimir:
        blocks = {k: casimir_eigenvalue(KTypeIndex(f.mp.p, k)) ** spec.casimir * v for k, v in blocks.items()}
    if spec.laplacian:
        grid = grid or SpectralGrid()
        psi = helgason_fourier(SpatialFunction(f.mp, f.grid, blocks, f.support), grid, sigmas=(0.0,))
        factor = (-(grid.lambdas ** 2 + f.mp.rho ** 2)) ** spec.laplacian
        scaled = {k: v * factor for k, v in psi.coefficients.items()}
        g = inverse_helgason(SpectralFunction(f.mp, grid, (0.0,), scaled), f.grid, registry=registry)
        blocks = {k: np.asarray(v) for k, v in g.coefficients.items()}
    return blocks


def spatial_seminorm(f: SpatialFunction, spec: SeminormSpec, grid: SpectralGrid | None = None,
                     registry=None) -> SeminormValue:
    """``sup (1 + t)^N phi_0(a_t)^{-2/lp} |Delta^a Omega^b f|`` over the radial and boundary grids.

    The Laplacian acts spectrally (multiplication by ``-(lambda^2 + rho^2)``)
    and the Casimir by its eigenvalue on each K-type.  The tail bound is 0
    when `f` has a known support inside the grid and no Laplacian is
    applied; otherwise it is the weighted supremum over the outer tenth of
    the radial grid.
    """
    if spec.side != "spatial":
        raise ValueError("spec is not a spatial seminorm")
    blocks = _apply_operators(f, spec, grid, registry)
    if not blocks:
        return SeminormValue(0.0, 0.0, spec)
    t = f.grid.t
    weight = (1.0 + t) ** spec.N * spherical_fn(0.0, t, f.mp).real ** (-2.0 / spec.lp)
    mag = _boundary_sup(blocks, f.mp.p) * weight
    if spec.laplacian == 0 and f.support is not None and f.support < t[-1]:
        tail = 0.0
    else:
        tail = float(np.max(mag[t >= 0.9 * t[-1]]))
    return SeminormValue(float(np.max(mag)), tail, spec)


def _nu_derivative(values, dlam, order, stencil=4):
    """``d^order / d nu`` along a line ``nu = sigma + i lambda`` (last axis), by finite differences.

    Interior points use a centered stencil; the ends use shifted stencils
    of the same width.
    """
    if order == 0:
        return values
    values = np.asarray(values, dtype=complex)
    n = values.shape[-1]
    half = stencil + (order + 1) // 2
    width = 2 * half + 1
    if n < width:
        raise ValueError("line too short for the finite-difference stencil")
    out = np.empty_like(values)
    center = fd_weights(np.arange(-half, half + 1), order) / dlam ** order
    acc = np.zeros(values.shape[:-1] + (n - 2 * half,), dtype=complex)
    for k, wk in enumerate(center):
        acc += wk * values[..., k: k + n - 2 * half]
    out[..., half: n - half] = acc
    for i in list(range(half)) + list(range(n - half, n)):
        lo = 0 if i < half else n - width
        idx = np.arange(lo, lo + width)
        out[..., i] = values[..., idx] @ (fd_weights(idx - i, order) / dlam ** order)
    # d/dnu = -i d/dlambda on the line
    return out * (-1j) ** order


def spectral_seminorm(psi, spec: SeminormSpec) -> SeminormValue:
    """``sup (1 + |nu|)^N |P(d/dnu) Omega^b psi|`` over the sampled tube lines and boundary.

    Raises
    ------
    ValueError
        If the tube has positive width but `psi` lacks the lines ``Re nu = +-epsilon rho``.
    """
    if spec.side != "spectral":
        raise ValueError("spec is not a spectral seminorm")
    mp = psi.mp
    need = {0.0} if spec.epsilon == 0 else {-spec.epsilon * mp.rho, 0.0, spec.epsilon * mp.rho}
    have = {round(s, 12) for s in psi.sigmas}
    if not {round(s, 12) for s in need} <= have:
        raise ValueError("insufficient tube sampling for this epsilon")
    keep = [i for i, s in enumerate(psi.sigmas) if round(s, 12) in {round(x, 12) for x in need}]
    if isinstance(psi, DeltaSpectralFunction):
        blocks = {"row": psi.rows[:, keep, :]}
        casimir = casimir_eigenvalue(psi.delta)
    else:
        blocks = {k: v[:, keep, :] for k, v in psi.coefficients.items()}
        casimir = None
    if not blocks:
        return SeminormValue(0.0, 0.0, spec)
    nus = psi.nus[keep]
    weight = (1.0 + np.abs(nus)) ** spec.N
    mags = []
    for label, v in blocks.items():
        deriv = np.zeros_like(v, dtype=complex)
        for order, coef in enumerate(spec.poly.coefficients):
            if coef != 0:
                deriv = deriv + coef * _nu_derivative(v, psi.grid.dlambda, order)
        if spec.casimir:
            eig = casimir if casimir is not None else casimir_eigenvalue(KTypeIndex(mp.p, label))
            deriv = deriv * eig ** spec.casimir
        mags.append((label, deriv))
    if isinstance(psi, DeltaSpectralFunction):
        mag = np.sqrt(np.sum(np.abs(mags[0][1]) ** 2, axis=0))
    else:
        flat = {label: d.reshape(d.shape[0], -1) for label, d in mags}
        mag = _boundary_sup(flat, mp.p).reshape(nus.shape)
    val = mag * weight
    lam = np.abs(psi.grid.lambdas)
    edge = lam >= 0.9 * lam.max()
    return SeminormValue(float(np.max(val)), float(np.max(val[:, edge])), spec)


# ---------------------------------------------------------------------------
# Exponential type
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PWReport:
    """Fitted exponential type and growth constants of a spectral function."""

    r_hat: float
    sup_constants: dict
    support_estimate: float | None
    envelope: dict
    symmetry_residual: float | None = None

    def as_dict(self):
        return {
            "r_hat": self.r_hat,
            "sup_constants": {str(k): v for k, v in self.sup_constants.items()},
            "support_estimate": self.support_estimate,
            "envelope": {f"{k:g}": v for k, v in self.envelope.items()},
            "symmetry_residual": self.symmetry_residual,
        }


RAY_FACTORS = (0.5, 1.0, 2.0, 3.0)


def exponential_type(evaluate, rho, lambda_max=64.0, ray_factors=RAY_FACTORS, n_values=(0, 2, 4),
                     support_estimate=None) -> PWReport:
    """Fit the uniform exponential type of ``psi`` from its growth along ``Re nu``.

    Parameters
    ----------
    evaluate : callable
        ``evaluate(sigma) -> (lambdas, values)`` with ``values[..., k]`` the
        samples of ``psi(sigma + i lambdas[k])``; leading axes are maximized over.
    rho : float
        Sets the ray offsets ``sigma = factor * rho``.
    lambda_max : float
        The envelope is taken over ``lambda in [lambda_max / 2, lambda_max]``.

    Notes
    -----
    A transform of a function supported in ``[-R, R]`` behaves on the
    window like ``A exp(nu R) + B exp(-nu R)`` times a slowly varying
    prefactor.  The mean of ``|psi|^2`` over the window averages out the
    cross term, so ``M(sigma) / M(0) = cosh(2 sigma R)`` when
    ``|A| = |B|``; ``R`` is the least-squares fit of ``log`` of that
    ratio.  The prefactor is the same on every ray and cancels.  The
    window supremum ``E(sigma)`` is reported in ``envelope``.

    Raises
    ------
    NonFiniteError
        If ``psi`` is not finite at a requested offset.
    """
    sigmas = np.array([0.0] + [f * rho for f in ray_factors])
    env = {}
    mean_sq = {}
    lines = {}
    for s in sigmas:
        lam, vals = evaluate(float(s))
        lam = np.asarray(lam, dtype=float)
        vals = np.abs(np.asarray(vals))
        if not np.all(np.isfinite(vals)):
            raise NonFiniteError(f"non-finite values on the ray Re nu = {s}")
        vals = vals.reshape(-1, lam.size).max(axis=0)
        window = (np.abs(lam) >= 0.5 * lambda_max) & (np.abs(lam) <= lambda_max)
        lines[float(s)] = (lam, vals)
        env[float(s)] = float(vals[window].max())
        mean_sq[float(s)] = float(np.mean(vals[window] ** 2))
    if mean_sq[0.0] == 0.0:
        return PWReport(0.0, {n: 0.0 for n in n_values}, support_estimate, env)
    y = np.array([math.log(mean_sq[float(s)] / mean_sq[0.0]) for s in sigmas[1:]])
    x = sigmas[1:]

    def misfit(r):
        return float(np.sum((y - np.log(np.cosh(2.0 * x * r))) ** 2))

    upper = max(1.0, 2.0 * float(np.max(np.abs(y) / x)) + 1.0)
    res = minimize_scalar(misfit, bounds=(0.0, upper), method="bounded", options={"xatol": 1e-10})
    r_hat = float(res.x) if misfit(res.x) < misfit(0.0) else 0.0
    sup_constants = {}
    for n in n_values:
        best = 0.0
        for s, (lam, vals) in lines.items():
            z = np.abs(s + 1j * lam)
            best = max(best, float(np.max(np.exp(-r_hat * abs(s)) * (1.0 + z) ** n * vals)))
        sup_constants[n] = best
    return PWReport(r_hat, sup_constants, support_estimate, env)


def helgason_evaluator(f: SpatialFunction, grid: SpectralGrid | None = None):
    """Adapter for :func:`exponential_type`: the Fourier transform of `f` on one line."""
    grid = grid or SpectralGrid()

    def evaluate(sigma):
        psi = helgason_fourier(f, grid, sigmas=(sigma,))
        blocks = [v[:, 0, :] for v in psi.coefficients.values()]
        return grid.lambdas, np.concatenate(blocks, axis=0)

    return evaluate


def paley_wiener_report(f: SpatialFunction, grid: SpectralGrid | None = None, **kwargs) -> PWReport:
    """Exponential type of the Fourier transform of `f`, with `f`'s support radius as the estimate."""
    grid = grid or SpectralGrid()
    return exponential_type(helgason_evaluator(f, grid), f.mp.rho, grid.lambda_max,
                            support_estimate=f.support, **kwargs)


# ---------------------------------------------------------------------------
# Cutoff decomposition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CutoffSpec:
    """Cutoff ``omega_j``: equal to 1 on ``|t| <= j - 1`` and 0 on ``|t| >= j``.

    `sharpness` is the constant ``a`` of the bump ``exp(-a / (x (1 - x)))``
    whose normalized integral forms the transition.
    """

    j: int
    sharpness: float = 3.0

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("j must be >= 1")
        if self.sharpness <= 0:
            raise ValueError("sharpness must be positive")


_STEP_RULE = gauss_legendre(96, 0.0, 1.0)


def _transition_bump(x, a):
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        out = np.exp(-a / (x * (1.0 - x)))
    return np.where((x > 0.0) & (x < 1.0), out, 0.0)


def _smooth_step(x, a):
    """0 for ``x <= 0``, 1 for ``x >= 1``: normalized integral of ``exp(-a / (x (1 - x)))``.

    The integral over ``[0, x]`` is split at 1/2 and each half is
    integrated by Gauss-Legendre on its own subinterval.
    """
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 1.0, 1.0, 0.0)
    mid = (x > 0.0) & (x < 1.0)
    xm = x[mid]
    u, w = _STEP_RULE.nodes, _STEP_RULE.weights
    half = float(np.sum(w * 0.5 * _transition_bump(0.5 * u, a)))
    # symmetry: S(x) = 1 - S(1 - x), so integrate only up to min(x, 1 - x)
    y = np.minimum(xm, 1.0 - xm)
    partial = (_transition_bump(np.outer(y, u), a) @ w) * y
    lower = partial / (2.0 * half)
    out[mid] = np.where(xm <= 0.5, lower, 1.0 - lower)
    return out


def cutoff_omega(spec: CutoffSpec, t):
    """``omega_j(t) = S(j - |t|)``; translating the profile gives ``omega_{j+1}(t) = omega_j(t - 1)`` for ``t >= 1``."""
    return _smooth_step(spec.j - np.abs(np.asarray(t, dtype=float)), spec.sharpness)


@dataclass(frozen=True)
class CutoffResult:
    G: AbelFunction
    H_j: AbelFunction
    h_j: DeltaSpectralFunction
    f_j: SpatialFunction
    f_rec: SpatialFunction
    evenness_residual: float
    reflection_residual: float
    localization: float


def _fd_derivatives(values, dt, max_order, stencil=10):
    """Centered finite-difference derivatives of orders ``0..max_order`` along the last axis."""
    derivs = [values]
    n = values.shape[-1]
    padded = np.concatenate([np.zeros(values.shape[:-1] + (stencil + max_order,)), values,
                             np.zeros(values.shape[:-1] + (stencil + max_order,))], axis=-1)
    off = stencil + max_order
    for order in range(1, max_order + 1):
        half = stencil + (order + 1) // 2
        w = fd_weights(np.arange(-half, half + 1), order) / dt ** order
        acc = np.zeros_like(values, dtype=complex)
        for k, wk in zip(range(-half, half + 1), w):
            acc = acc + wk * padded[..., off + k: off + k + n]
        derivs.append(acc)
    return derivs


def _apply_pdelta_minus_d(u, dt, delta, mp):
    """``p_delta(-d/dt) u`` with ``p_delta(-x) = prod_j (rho + j - x)``."""
    poly = pdelta(delta, mp).reflect()  # coefficients of p(-x) in powers of x
    derivs = _fd_derivatives(u, dt, poly.degree)
    out = np.zeros_like(u, dtype=complex)
    for order, coef in enumerate(poly.coefficients):
        out = out + coef * derivs[order]
    return out


def cutoff_decompose(h: DeltaSpectralFunction, spec: CutoffSpec, radial: RadialGrid | None = None,
                     registry=None, reflection_tol=1e-6, t_max_out=None) -> CutoffResult:
    """Split ``h`` at radius ``j``.

    Returns ``G``, ``H_j``, ``h_j = F H_j``, ``f_j = T^{-1} H_j``, the full
    reconstruction ``f_rec`` of ``h`` and three diagnostics: relative
    evenness residual of ``G``, relative p_delta reflection residual of ``h_j`` and
    ``max_{t > j} |f_rec - f_j| / max |f_rec|``.

    Raises
    ------
    SymmetryError
        If ``h`` violates the symmetry relation beyond `reflection_tol`.
    """
    radial = radial or RadialGrid()
    delta, mp = h.delta, h.mp
    rep = h.pdelta_reflection(reflection_tol)
    if not rep.passed:
        raise SymmetryError(f"h violates the p_delta symmetry: {rep.relative:.2e}")
    idx = [i for i, s in enumerate(h.sigmas) if s == 0.0][0]
    nus = h.nus[idx]
    quotient = divide_pdelta(h.rows[:, idx, :], nus, delta, mp)
    line_only = DeltaSpectralFunction(delta, mp, h.grid, (0.0,), quotient[:, None, :])
    G = euclid_inverse(line_only, radial)
    g = G.rows
    even = float(np.max(np.abs(g[:, ::-1] - g)) / max(np.max(np.abs(g)), 1e-300))
    t = radial.line
    u = (1.0 - cutoff_omega(spec, t)) * g
    H = _apply_pdelta_minus_d(u, radial.dt, delta, mp)
    H_j = AbelFunction(delta, mp, radial, H)
    h_j = euclid_fourier(H_j, h.grid, sigmas=(0.0,))
    # measured against the scale of h: when j exceeds the support, h_j is pure mollifier tail
    reflection = h_j.pdelta_reflection().residual / max(rep.scale, 1e-300)
    if reflection > reflection_tol:
        raise SymmetryError(f"h_j violates the p_delta symmetry: {reflection:.2e}")
    f_j = inverse_delta_spherical(h_j, radial, t_max_out=t_max_out, registry=registry)
    f_rec = inverse_delta_spherical(h, radial, t_max_out=t_max_out, registry=registry)
    diff = f_rec.sub(f_j)
    local = diff.sup_beyond(spec.j) / max(f_rec.sup(), 1e-300)
    return CutoffResult(G, H_j, h_j, f_j, f_rec, even, reflection, local)


def root_quotient(h: DeltaSpectralFunction, sigma, stencil=10):
    """``h(nu) / p_delta(-nu)`` on the line ``Re nu = sigma`` with the root guard."""
    idx = [i for i, s in enumerate(h.sigmas) if abs(s - sigma) < 1e-12][0]
    return divide_pdelta(h.rows[:, idx, :], h.nus[idx], h.delta, h.mp, stencil=stencil)


# ---------------------------------------------------------------------------
# Tube holomorphy
# ---------------------------------------------------------------------------

def tube_holomorphy_residual(f: SpatialFunction, grid: SpectralGrid | None = None, epsilon=1.0, window=8.0):
    """Compare ``Hf`` on ``Re nu = epsilon rho`` with its continuation from the real line.

    The continuation goes through the Radon side: the real-line values
    are inverted by the classical inverse transform, restricted to
    ``|t| <= window`` (beyond which the band-limited reconstruction is
    rounding noise amplified by ``exp(sigma |t|)``) and transformed again
    on the shifted line.  Returns the maximal residual relative to the
    peak of the direct evaluation.
    """
    grid = grid or SpectralGrid()
    sigma = epsilon * f.mp.rho
    direct = helgason_fourier(f, grid, sigmas=(sigma,))
    real_line = helgason_fourier(f, grid, sigmas=(0.0,))
    radon_part = euclid_inverse(real_line, f.grid)
    keep = np.abs(radon_part.t) <= window
    clipped = {k: np.where(keep, v, 0.0) for k, v in radon_part.coefficients.items()}
    radon_part = RadonFunction(f.mp, f.grid, clipped, f.lmax)
    shifted = euclid_fourier(radon_part, grid, sigmas=(sigma,))
    resid = 0.0
    peak = 0.0
    for label, v in direct.coefficients.items():
        resid = max(resid, float(np.max(np.abs(v - shifted.coefficients[label]))))
        peak = max(peak, float(np.max(np.abs(v))))
    return resid / peak if peak > 0 else resid


# ---------------------------------------------------------------------------
# Continuity
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContinuityRow:
    name: str
    spatial: float
    spectral: float

    @property
    def ratio(self) -> float:
        return self.spatial / self.spectral


def continuity_report(family, spatial_spec: SeminormSpec, spectral_spec: SeminormSpec,
                      max_derivative=2, grid: SpectralGrid | None = None, registry=None):
    """Spatial seminorm against the dominating spectral expression for each member of `family`.

    `family` is a list of ``(name, SpatialFunction)``.  The spectral side is
    ``sum_{k <= max_derivative} sup (1 + |nu|)^N |d^k/dnu^k Hf|`` with ``N``
    and the tube from `spectral_spec`.  Members that vanish identically are
    skipped.
    """
    grid = grid or SpectralGrid(epsilon=spectral_spec.epsilon)
    rows = []
    for name, f in family:
        if f.sup() == 0:
            continue
        s_val = spatial_seminorm(f, spatial_spec, grid, registry).value
        psi = helgason_fourier(f, grid)
        t_val = 0.0
        for k in range(max_derivative + 1):
            spec_k = replace(spectral_spec, poly=Polynomial((0.0,) * k + (1.0,)))
            t_val += spectral_seminorm(psi, spec_k).value
        rows.append(ContinuityRow(name, s_val, t_val))
    return rows
