"""Batch command-line interface.

Each command runs one family of checks, writes ``results.csv``,
``report.json``, ``timing.json`` and ``plotdata/*.dat`` into the output
directory, and exits nonzero when any tolerance gate fails::

    hyperharm spherical-table --out out/ --threads 1
    hyperharm cutoff --config cutoff.json --out out/

Exit status is 0 when every gate passes, 1 when a gate fails and 2 on a
configuration or runtime error (recorded in ``report.json``).
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import HyperbolicPoint, ModelParams, random_rotation, sphere_rule, north_pole
from .ktypes import BoundaryFunction, KTypeIndex, divide_pdelta, mul_pdelta
from .numerics import gregory
from .parallel import get_threads, set_threads
from .schwartz_pw import (
    CutoffSpec,
    SeminormSpec,
    continuity_report,
    cutoff_decompose,
    paley_wiener_report,
    root_quotient,
    spatial_seminorm,
    spectral_seminorm,
    tube_holomorphy_residual,
)
from .spherical import (
    c_growth_slope,
    clear_table_cache,
    eisenstein_radial,
    fit_c_asymptotic,
    harish_chandra_c,
    pdelta_ratio_fit,
    phi0_envelope,
    plancherel_density,
    poisson_integral,
    spherical_fn,
    tube_envelope,
)
from .transforms import (
    CalibrationRegistry,
    Grids,
    RadialGrid,
    SpatialFunction,
    SpectralGrid,
    analytic_inversion_constant,
    bump_profile,
    calibrate_plancherel,
    check_symmetry,
    delta_spectral_energy,
    delta_spherical,
    euclid_fourier,
    generalized_abel,
    helgason_fourier,
    inverse_delta_spherical,
    inverse_helgason,
    radon,
    smooth_bump_profile,
)

SCHEMA = "hyperharm/1"
CSV_HEADER = ("experiment", "case", "quantity", "value", "relation", "tolerance", "passed")

log = logging.getLogger("hyperharm")


class ConfigError(ValueError):
    """The run configuration is invalid or names an unsupported combination."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RunConfig:
    """One experiment run.

    Attributes
    ----------
    experiment : str
        Command name.
    dims : tuple of int
        Dimensions ``p`` to run.
    grid : dict
        Overrides for ``t_max``, ``dt``, ``lambda_max``, ``dlambda``, ``epsilon``.
    ktypes : tuple of int or None
        K-type labels; ``None`` selects the command default.
    bumps : tuple of (radius, power) or None
        Bump family; ``None`` selects the command default.
    params : dict
        Command-specific parameters.
    seed : int
    """

    experiment: str
    dims: tuple = ()
    grid: dict = field(default_factory=dict)
    ktypes: tuple | None = None
    bumps: tuple | None = None
    params: dict = field(default_factory=dict)
    seed: int = 0

    @classmethod
    def from_dict(cls, experiment, data):
        data = dict(data or {})
        named = data.pop("experiment", experiment)
        if named != experiment:
            raise ConfigError(f"config is for '{named}', not '{experiment}'")
        dims = data.pop("p", data.pop("dims", None))
        if dims is None:
            dims = DEFAULT_DIMS[experiment]
        dims = tuple(int(d) for d in (dims if isinstance(dims, (list, tuple)) else [dims]))
        ktypes = data.pop("ktypes", None)
        bumps = data.pop("bumps", None)
        cfg = cls(
            experiment=experiment,
            dims=dims,
            grid=dict(data.pop("grid", {})),
            ktypes=None if ktypes is None else tuple(int(k) for k in ktypes),
            bumps=None if bumps is None else tuple((float(b[0]), int(b[1])) for b in bumps),
            params=dict(data.pop("params", {})),
            seed=int(data.pop("seed", 0)),
        )
        if data:
            raise ConfigError(f"unknown config keys: {sorted(data)}")
        cfg.validate()
        return cfg

    def validate(self):
        unknown = set(self.grid) - {"t_max", "dt", "lambda_max", "dlambda", "epsilon"}
        if unknown:
            raise ConfigError(f"unknown grid keys: {sorted(unknown)}")
        for p in self.dims:
            if p < 2:
                raise ConfigError(f"dimension p={p} is not supported (need p >= 2)")
            if self.experiment not in ANY_DIMENSION and p not in (2, 3):
                raise ConfigError(f"'{self.experiment}' supports p in {{2, 3}}, got p={p}")
            for label in self.ktypes or ():
                if p not in (2, 3) and label != 0:
                    raise ConfigError(f"K-type {label} is not supported for p={p}")
                if p == 3 and label < 0:
                    raise ConfigError("K-type labels for p=3 are degrees l >= 0")

    def grids(self, **defaults) -> Grids:
        g = {**defaults, **self.grid}
        radial = RadialGrid(g.get("t_max", 12.0), g.get("dt", 1.0 / 256))
        spectral = SpectralGrid(g.get("lambda_max", 64.0), g.get("dlambda", 1.0 / 16), g.get("epsilon", 0.0))
        return Grids(radial, spectral)

    def ktypes_for(self, p, default):
        return tuple(self.ktypes) if self.ktypes is not None else default[p]

    def as_dict(self):
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["ktypes"] = None if self.ktypes is None else list(self.ktypes)
        d["bumps"] = None if self.bumps is None else [list(b) for b in self.bumps]
        return d


# ---------------------------------------------------------------------------
# Result recording
# ---------------------------------------------------------------------------

def _fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


class Recorder:
    """Collects result rows, gates and plot data for one run."""

    def __init__(self, experiment):
        self.experiment = experiment
        self.rows = []
        self.plots = {}
        self.timings = []
        self._clock = time.perf_counter()

    def info(self, case, quantity, value):
        self.rows.append((self.experiment, case, quantity, _fmt(value), "", "", ""))

    def gate(self, case, quantity, value, tolerance, relation="<="):
        v = float(value)
        if relation == "<=":
            ok = math.isfinite(v) and v <= tolerance
        elif relation == ">=":
            ok = math.isfinite(v) and v >= tolerance
        elif relation == ">":
            ok = math.isfinite(v) and v > tolerance
        elif relation == "==":
            ok = v == tolerance
        else:
            raise ValueError(f"unknown relation {relation}")
        self.rows.append((self.experiment, case, quantity, _fmt(value), relation, _fmt(tolerance),
                          "1" if ok else "0"))
        log.info("%s %s %s = %s (%s %s) %s", self.experiment, case, quantity, _fmt(value), relation,
                 _fmt(tolerance), "ok" if ok else "FAIL")
        return ok

    def plot(self, name, x, y):
        self.plots[name] = (np.asarray(x, dtype=float), np.asarray(y, dtype=float))

    def lap(self, label):
        now = time.perf_counter()
        self.timings.append((label, now - self._clock))
        self._clock = now

    @property
    def gates(self):
        return [r for r in self.rows if r[6] != ""]

    @property
    def passed(self):
        return all(r[6] == "1" for r in self.gates)

    def csv_text(self):
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        writer.writerows(self.rows)
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

DEFAULT_KTYPES = {2: (0, 1, -1, 2, -2), 3: (0, 1, 2)}
NONTRIVIAL_KTYPES = {2: (1, -1, 2, -2), 3: (1, 2)}


def _test_vector(delta: KTypeIndex):
    return np.arange(1, delta.dim + 1) / delta.dim


def _bump_function(mp, radius, power, delta: KTypeIndex | None = None, grid=None):
    """Bump of K-type ``delta`` whose radial profile vanishes like ``t^l`` at the origin."""
    delta = delta or KTypeIndex(mp.p, 0)
    prof = bump_profile(radius, power, degree=delta.degree)
    return SpatialFunction.from_profile(mp, prof, delta, _test_vector(delta), grid=grid)


def _rel_diff(a: dict, b: dict):
    num = sum(float(np.sum(np.abs(a[k] - b[k]) ** 2)) for k in a)
    den = sum(float(np.sum(np.abs(a[k]) ** 2)) for k in a)
    return math.sqrt(num / den) if den > 0 else math.sqrt(num)


def _full_energy_by_quadrature(psi, n_polar=24):
    """``int_0^Lambda int_B |psi(i lam, b)|^2 db |c|^-2 d lam`` by boundary quadrature."""
    pts, w = sphere_rule(psi.mp.p, n_polar)
    nh = psi.grid.n_half
    line = psi.line(0.0)
    bf = BoundaryFunction(psi.mp.p, {k: v[:, nh - 1:] for k, v in line.items()}, psi.lmax)
    vals = bf.evaluate(pts)  # (N, n_half)
    per_lambda = (np.abs(vals) ** 2 * w[:, None]).sum(axis=0)
    wl = psi.grid.half_weights() * plancherel_density(psi.grid.half, psi.mp)
    return float(np.sum(per_lambda * wl))


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_spherical_table(cfg: RunConfig, rec: Recorder, registry):
    """Spherical functions: hypergeometric evaluation against boundary quadrature."""
    lambdas = cfg.params.get("lambdas", [0.5, 1.0, 2.0])
    ts = np.asarray(cfg.params.get("t", np.arange(0.0, 10.0001, 0.5)), dtype=float)
    sweep = cfg.params.get("sweep_lambdas", [0.0, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 15.0, 19.9])
    factors = cfg.params.get("sweep_sigma_factors", [0.0, 0.5, 1.0])
    tol = cfg.params.get("tolerance", 1e-8)
    for p in cfg.dims:
        mp = ModelParams(p)
        for lam in lambdas:
            phi = spherical_fn(1j * lam, ts, mp)
            for t, v in zip(ts, phi):
                rec.info(f"p={p};lambda={lam:g};t={t:g}", "phi", v.real)
            rec.plot(f"spherical_p{p}_lambda{lam:g}", ts, phi.real)
            if p == 3:
                with np.errstate(invalid="ignore", divide="ignore"):
                    closed = np.where(ts == 0, 1.0, np.sin(lam * ts) / (lam * np.sinh(ts)))
                env = spherical_fn(0.0, ts, mp).real
                rec.gate(f"p=3;lambda={lam:g}", "closed_form_error", float(np.max(np.abs(phi - closed) / env)), tol)
        worst = 0.0
        for fac in factors:
            for lam in sweep:
                nu = fac * mp.rho + 1j * lam
                if abs(nu) > 20:
                    continue
                hyp = spherical_fn(nu, ts, mp)
                quad = np.array([eisenstein_radial(nu, t, 0, mp) for t in ts])
                env = spherical_fn(fac * mp.rho, ts, mp).real
                worst = max(worst, float(np.max(np.abs(hyp - quad) / env)))
        rec.gate(f"p={p}", "hypergeometric_vs_quadrature", worst, tol)
        rec.lap(f"p={p}")


def run_c_function(cfg: RunConfig, rec: Recorder, registry):
    """Envelopes of spherical functions and growth of the c-function."""
    t = np.asarray(cfg.params.get("t", np.linspace(0.1, 20.0, 200)), dtype=float)
    lambdas = np.asarray(cfg.params.get("lambdas", np.arange(0.0, 20.5, 1.0)), dtype=float)
    for p in cfg.dims:
        mp = ModelParams(p)
        lower, const = phi0_envelope(mp, t)
        phi0 = spherical_fn(0.0, t, mp).real
        rec.gate(f"p={p}", "phi0_lower_bound_holds", int(lower), 1, "==")
        rec.gate(f"p={p}", "phi0_upper_constant", const, 10.0)
        rec.plot(f"phi0_envelope_p{p}", t, phi0 * np.exp(mp.rho * t) / (1.0 + t))
        for eps in (0.0, 0.5, 1.0):
            rec.gate(f"p={p};epsilon={eps:g}", "tube_envelope_constant", tube_envelope(mp, eps, t, lambdas), 10.0)
        slope = c_growth_slope(mp)
        rec.gate(f"p={p}", "c_inverse_loglog_slope_error", abs(slope - mp.n / 2.0), 0.1)
        rec.info(f"p={p}", "c_inverse_loglog_slope", slope)
        worst = 0.0
        for lam in (1.0, 2.0, 4.0):
            fitted = fit_c_asymptotic(lam, mp)
            exact = complex(harish_chandra_c(1j * lam, mp))
            worst = max(worst, abs(fitted - exact) / abs(exact))
        rec.gate(f"p={p}", "c_asymptotic_fit_error", worst, 1e-6)
        lam = np.linspace(0.0, 100.0, 801)
        rec.plot(f"c_density_p{p}", lam, plancherel_density(lam, mp))
        rec.lap(f"p={p}")


def run_diagram(cfg: RunConfig, rec: Recorder, registry):
    """Fourier transform against Radon followed by the classical transform, per K-type."""
    grids = cfg.grids(epsilon=1.0)
    bumps = cfg.bumps or ((2.0, 4), (1.5, 6))
    for p in cfg.dims:
        mp = ModelParams(p)
        for label in cfg.ktypes_for(p, DEFAULT_KTYPES):
            delta = KTypeIndex(p, label)
            for radius, power in bumps:
                f = _bump_function(mp, radius, power, delta.contragredient, grids.radial)
                case = f"p={p};delta={label};R={radius:g};k={power}"
                psi = helgason_fourier(f, grids.spectral)
                via_radon = euclid_fourier(radon(f), grids.spectral)
                rec.gate(case, "helgason_vs_radon", _rel_diff(psi.coefficients, via_radon.coefficients), 1e-6)
                h = delta_spherical(f, delta, grids.spectral)
                via_abel = euclid_fourier(generalized_abel(f, delta), grids.spectral)
                rec.gate(case, "delta_vs_abel", _rel_diff({0: h.rows}, {0: via_abel.rows}), 1e-7)
        rec.lap(f"p={p}")


def _doubling_sequence(start, stop):
    """``start, 2 start, ...`` below ``stop``, then ``stop`` itself."""
    seq = []
    while start < stop:
        seq.append(start)
        start *= 2.0
    return seq + [float(stop)]


def run_roundtrip(cfg: RunConfig, rec: Recorder, registry):
    """Inversion round trips and their convergence as the spectral cutoff doubles."""
    base = cfg.grids()
    sequence = cfg.params.get("lambda_sequence") or _doubling_sequence(8.0, base.spectral.lambda_max)
    bumps = cfg.bumps or ((1.0, 4), (2.0, 4), (4.0, 6))
    for p in cfg.dims:
        mp = ModelParams(p)
        errors = {}
        for lam_max in sequence:
            grids = Grids(base.radial, SpectralGrid(lam_max, base.spectral.dlambda, 0.0))
            calibrate_plancherel(mp, grids, registry)
            for label in cfg.ktypes_for(p, {2: (0, 1), 3: (0, 1)}):
                delta = KTypeIndex(p, label)
                for radius, power in bumps:
                    f = _bump_function(mp, radius, power, delta.contragredient, grids.radial)
                    nf = f.norm_sq()
                    psi = helgason_fourier(f, grids.spectral, sigmas=(0.0,))
                    g = inverse_helgason(psi, grids.radial, registry=registry)
                    errors.setdefault((label, radius, power, "fourier"), []).append(math.sqrt(g.sub(f).norm_sq() / nf))
                    if not delta.is_trivial:
                        h = delta_spherical(f, delta, grids.spectral, sigmas=(0.0,))
                        g = inverse_delta_spherical(h, grids.radial, registry=registry)
                        errors.setdefault((label, radius, power, "delta"), []).append(
                            math.sqrt(g.sub(f).norm_sq() / nf))
            rec.lap(f"p={p};lambda_max={lam_max:g}")
        floor = cfg.params.get("monotone_floor", 1e-9)
        worst = np.zeros(len(sequence))
        for (label, radius, power, route), errs in sorted(errors.items(), key=lambda kv: str(kv[0])):
            case = f"p={p};delta={label};R={radius:g};k={power};route={route}"
            for lam_max, e in zip(sequence, errs):
                rec.info(f"{case};lambda_max={lam_max:g}", "relative_l2_error", e)
            rec.gate(case, "relative_l2_error", errs[-1], 1e-3)
            drops = [b < a or b <= floor for a, b in zip(errs, errs[1:])]
            rec.gate(case, "monotone_convergence", int(all(drops)), 1, "==")
            worst = np.maximum(worst, errs)
        rec.plot(f"roundtrip_error_p{p}", sequence, worst)


def run_plancherel(cfg: RunConfig, rec: Recorder, registry):
    """Plancherel constancy after one-bump calibration, per K-type, and the K-type sum."""
    grids = cfg.grids()
    bumps = cfg.bumps or ((1.0, 3), (1.5, 4), (2.0, 3), (2.5, 5), (3.0, 4))
    rng = np.random.default_rng(cfg.seed)
    for p in cfg.dims:
        mp = ModelParams(p)
        record = calibrate_plancherel(mp, grids, registry)
        for i, r in enumerate(record.held_out_ratios):
            rec.gate(f"p={p};delta=0;held_out={i}", "plancherel_ratio_error", abs(r - 1.0), 1e-3)
        c_pl = record.constant_plancherel
        for label in cfg.ktypes_for(p, NONTRIVIAL_KTYPES):
            delta = KTypeIndex(p, label)
            for radius, power in bumps:
                f = _bump_function(mp, radius, power, delta.contragredient, grids.radial)
                h = delta_spherical(f, delta, grids.spectral, sigmas=(0.0,))
                ratio = c_pl * delta_spectral_energy(h) / f.norm_sq()
                rec.gate(f"p={p};delta={label};R={radius:g};k={power}", "plancherel_ratio_error", abs(ratio - 1.0), 1e-3)
        lmax = cfg.params.get("sum_lmax", 4)
        labels = list(range(-lmax, lmax + 1)) if p == 2 else list(range(lmax + 1))
        f = None
        for label in labels:
            delta = KTypeIndex(p, label)
            vec = rng.normal(size=delta.dim) + 1j * rng.normal(size=delta.dim)
            prof = bump_profile(1.5 + 0.25 * abs(label), 4, degree=delta.degree)
            g = SpatialFunction.from_profile(mp, prof, delta, vec, grid=grids.radial)
            f = g if f is None else f + g
        full = _full_energy_by_quadrature(helgason_fourier(f, grids.spectral, sigmas=(0.0,)))
        parts = sum(delta_spectral_energy(delta_spherical(f, KTypeIndex(p, lab).contragredient, grids.spectral,
                                                          sigmas=(0.0,))) for lab in labels)
        rec.gate(f"p={p};lmax={lmax}", "ktype_sum_consistency", abs(parts / full - 1.0), 1e-6)
        rec.info(f"p={p};lmax={lmax}", "plancherel_full", c_pl * full)
        rec.lap(f"p={p}")


def run_paley_wiener(cfg: RunConfig, rec: Recorder, registry):
    """Exponential type against support radius, and support of Radon, Abel and inverse transforms."""
    grids = cfg.grids()
    radii = cfg.params.get("radii", [1.0, 2.0, 4.0])
    for p in cfg.dims:
        mp = ModelParams(p)
        calibrate_plancherel(mp, grids, registry)
        delta = KTypeIndex(p, 1)
        for radius in radii:
            case = f"p={p};R={radius:g}"
            f3 = SpatialFunction.from_profile(mp, bump_profile(radius, 3), grid=grids.radial)
            report = paley_wiener_report(f3, grids.spectral)
            rec.info(case, "fitted_type", report.r_hat)
            rec.gate(case, "fitted_type_relative_error", abs(report.r_hat / radius - 1.0), 0.05)
            f8 = SpatialFunction.from_profile(mp, bump_profile(radius, 8), grid=grids.radial)
            rf = radon(f8)
            mask = np.abs(rf.t) > radius
            vals = np.abs(rf.coefficients[0])
            rec.gate(case, "radon_outside_support", float(np.max(vals[:, mask], initial=0.0) / np.max(vals)), 1e-10)
            g = _bump_function(mp, radius, 8, delta.contragredient, grids.radial)
            tf = generalized_abel(g, delta)
            vals = np.abs(tf.rows)
            mask = np.abs(tf.t) > radius
            rec.gate(case, "abel_outside_support", float(np.max(vals[:, mask], initial=0.0) / np.max(vals)), 1e-10)
            back = inverse_helgason(helgason_fourier(f8, grids.spectral, sigmas=(0.0,)), grids.radial,
                                    registry=registry)
            rec.gate(case, "inverse_outside_support", back.sup_beyond(radius + 0.05) / back.sup(), 1e-6)
        rec.lap(f"p={p}")


def run_symmetry_check(cfg: RunConfig, rec: Recorder, registry):
    """Symmetry conditions on genuine transforms, the p_delta ratio law and the multiplication map."""
    grids = cfg.grids(epsilon=1.0)
    for p in cfg.dims:
        mp = ModelParams(p)
        for label in cfg.ktypes_for(p, DEFAULT_KTYPES):
            delta = KTypeIndex(p, label)
            f = _bump_function(mp, 2.0, 4, delta.contragredient, grids.radial)
            case = f"p={p};delta={label}"
            psi = helgason_fourier(f, grids.spectral)
            rec.gate(case, "sc_full_fourier", check_symmetry(psi, "SC-full").relative, 1e-8)
            h = delta_spherical(f, delta, grids.spectral)
            rec.gate(case, "pdelta_reflection", check_symmetry(h, "pdelta").relative, 1e-8)
            rec.gate(case, "sc_full_delta", check_symmetry(h, "SC-full").relative, 1e-8)
        max_s = cfg.params.get("ratio_law_max", 4)
        labels = range(-max_s, max_s + 1) if p == 2 else range(max_s + 1)
        for label in labels:
            delta = KTypeIndex(p, label)
            s, residuals = pdelta_ratio_fit(delta, mp)
            rec.gate(f"p={p};delta={label}", "ratio_law_degree", s, delta.s, "==")
            rec.gate(f"p={p};delta={label}", "ratio_law_residual", residuals[s], 1e-6)
        even = helgason_fourier(SpatialFunction.from_profile(mp, bump_profile(2.0, 4), grid=grids.radial),
                                grids.spectral, sigmas=(0.0,))
        G = even.coefficients[0][0, 0]
        nus = 1j * grids.spectral.lambdas
        for label in cfg.ktypes_for(p, NONTRIVIAL_KTYPES):
            delta = KTypeIndex(p, label)
            F = mul_pdelta(G, nus, delta, mp)
            back = divide_pdelta(F, nus, delta, mp)
            rec.gate(f"p={p};delta={label}", "multiplication_roundtrip",
                     float(np.max(np.abs(back - G)) / np.max(np.abs(G))), 1e-10)
        rec.lap(f"p={p}")


def run_cutoff(cfg: RunConfig, rec: Recorder, registry):
    """Cutoff decomposition: localization, symmetry of the pieces and the root guard."""
    grids = cfg.grids(lambda_max=128.0, t_max=8.0)
    label = (cfg.ktypes or (1,))[0]
    radius, power = (cfg.bumps or ((6.0, 8),))[0]
    js = cfg.params.get("j", [2, 4, 6])
    sharpness = cfg.params.get("sharpness", 3.0)
    for p in cfg.dims:
        mp = ModelParams(p)
        delta = KTypeIndex(p, label)
        calibrate_plancherel(mp, grids, registry)
        f = _bump_function(mp, radius, power, delta.contragredient, grids.radial)
        h = delta_spherical(f, delta, grids.spectral, sigmas=(0.0,))
        rec.lap(f"p={p};setup")
        for j in js:
            res = cutoff_decompose(h, CutoffSpec(j, sharpness), grids.radial, registry=registry)
            case = f"p={p};delta={label};R={radius:g};j={j}"
            rec.gate(case, f"max|f-f_j| for t>{j} (relative)", res.localization, 1e-6)
            rec.gate(case, "pdelta_reflection_h_j", res.reflection_residual, 1e-8)
            rec.gate(case, "evenness_G", res.evenness_residual, 1e-9)
            diff = res.f_rec.sub(res.f_j)
            prof = np.max(np.abs(diff.coefficients[delta.contragredient.label]), axis=0) / res.f_rec.sup()
            rec.plot(f"cutoff_localization_p{p}_j{j}", diff.grid.t, prof)
            rec.lap(f"p={p};j={j}")
        # root guard: p_delta(-nu) vanishes at nu = rho on the line Re nu = rho
        guard_grid = SpectralGrid(epsilon=1.0)
        g = _bump_function(mp, 2.0, 8, delta.contragredient)
        hg = delta_spherical(g, delta, guard_grid)
        q = root_quotient(hg, mp.rho)
        rec.gate(f"p={p};delta={label};epsilon=1", "guard_values_finite", int(np.all(np.isfinite(q))), 1, "==")
        # oracle from the Abel side: h(nu) = int a(t) exp(-nu t) dt
        abel = generalized_abel(g, delta)
        t = abel.t
        w = gregory(t[0], t[-1], n=t.size - 1).weights
        lam = guard_grid.lambdas
        i0 = int(np.argmin(np.abs(lam)))
        other_factors = math.prod(range(1, delta.s))
        worst = 0.0
        for k in range(i0 - 4, i0 + 5):
            nu = mp.rho + 1j * lam[k]
            if k == i0:
                ref = (abel.rows * (w * t * np.exp(-mp.rho * t))).sum(axis=1) / other_factors
            else:
                ref = (abel.rows * (w * np.exp(-nu * t))).sum(axis=1) / complex(
                    np.prod([mp.rho + j - nu for j in range(delta.s)]))
            worst = max(worst, float(np.max(np.abs(q[:, k] - ref)) / np.max(np.abs(ref))))
        rec.gate(f"p={p};delta={label};epsilon=1", "guard_vs_oracle", worst, 1e-10)
        rec.lap(f"p={p};guard")


def run_seminorm_report(cfg: RunConfig, rec: Recorder, registry):
    """Poisson-integral bound, seminorm finiteness, continuity ratios and tube holomorphy."""
    rng = np.random.default_rng(cfg.seed)
    n_samples = cfg.params.get("poisson_samples", 100)
    violations = 0
    worst = 0.0
    for i in range(n_samples):
        p = cfg.dims[i % len(cfg.dims)]
        mp = ModelParams(p)
        coeffs = {}
        for label in (range(-4, 5) if p == 2 else range(5)):
            d = KTypeIndex(p, label).dim
            coeffs[label] = rng.normal(size=d) + 1j * rng.normal(size=d)
        phi = BoundaryFunction(p, coeffs)
        pts, _ = sphere_rule(p, 128)
        sup = float(np.max(np.abs(phi.evaluate(pts))))
        sigma = rng.uniform(-2.0, 2.0) * mp.rho
        nu = sigma + 1j * rng.uniform(-10.0, 10.0)
        t = rng.uniform(0.0, 4.0)
        omega = random_rotation(p, rng) @ north_pole(p)
        x = HyperbolicPoint.polar(t, omega)
        val = abs(complex(poisson_integral(phi, nu, x, mp)))
        bound = float(spherical_fn(sigma, t, mp).real) * sup
        worst = max(worst, val / bound)
        violations += int(val > bound)
    rec.gate(f"samples={n_samples}", "poisson_bound_violations", violations, 0, "==")
    rec.info(f"samples={n_samples}", "poisson_bound_max_ratio", worst)
    rec.lap("poisson")

    if 2 in cfg.dims:
        mp = ModelParams(2)
        family = [(f"R={r:g};c={c:g}", SpatialFunction.from_profile(mp, bump_profile(r, 4, center=c)))
                  for r, c in ((1.0, 0.0), (1.5, 0.0), (2.0, 0.0), (1.0, 1.0), (1.0, 2.0))]
        spatial = SeminormSpec("spatial", lp=2.0, N=2)
        spectral = SeminormSpec.paired(2.0, N=6)
        rows = continuity_report(family, spatial, spectral)
        for r in rows:
            rec.info(f"p=2;{r.name}", "continuity_ratio", r.ratio)
        ratios = [r.ratio for r in rows]
        rec.gate("p=2;family=5", "continuity_ratio_spread", max(ratios) / min(ratios), 50.0)
        doubled = continuity_report([(n, f.scaled(2.0)) for n, f in family[:1]], spatial, spectral)
        rec.gate("p=2;family=1", "homogeneity", abs(doubled[0].ratio / rows[0].ratio - 1.0), 1e-10)
        rec.lap("continuity")

    for p in cfg.dims:
        mp = ModelParams(p)
        lp, eps = (1.0, 1.0) if p == 3 else (2.0, 0.0)
        f = SpatialFunction.from_profile(mp, smooth_bump_profile(4.0, sharpness=3.0))
        psi = helgason_fourier(f, SpectralGrid(epsilon=eps))
        for n in range(0, 7, 2):
            s = spatial_seminorm(f, SeminormSpec("spatial", lp=lp, N=n))
            t = spectral_seminorm(psi, SeminormSpec("spectral", epsilon=eps, N=n))
            rec.gate(f"p={p};lp={lp:g};N={n}", "spatial_seminorm_finite", int(math.isfinite(s.value)), 1, "==")
            rec.gate(f"p={p};epsilon={eps:g};N={n}", "spectral_seminorm_finite", int(math.isfinite(t.value)), 1, "==")
            rec.info(f"p={p};lp={lp:g};N={n}", "spatial_seminorm", s.value)
            rec.info(f"p={p};epsilon={eps:g};N={n}", "spectral_seminorm", t.value)
            rec.info(f"p={p};epsilon={eps:g};N={n}", "spectral_tail_bound", t.tail_bound)
        if p == 3:
            gauss = SpatialFunction.from_profile(mp, lambda r: np.exp(-r * r))
            rec.gate("p=3;epsilon=1", "tube_holomorphy_residual", tube_holomorphy_residual(gauss, epsilon=1.0), 1e-7)
        rec.lap(f"p={p}")


def run_calibrate(cfg: RunConfig, rec: Recorder, registry):
    """Calibration, checked for thread-count independence and against the analytic constant."""
    grids = cfg.grids()
    counts = cfg.params.get("thread_counts", [1, 8])
    saved = get_threads()
    try:
        for p in cfg.dims:
            mp = ModelParams(p)
            texts = []
            for n in counts:
                set_threads(n)
                clear_table_cache()
                record = calibrate_plancherel(mp, grids, CalibrationRegistry())
                texts.append(record.to_json())
                rec.lap(f"p={p};threads={n}")
            registry.put(record)
            same = int(all(t == texts[0] for t in texts))
            rec.gate(f"p={p}", "thread_independent_bytes", same, 1, "==")
            rec.gate(f"p={p}", "held_out_spread", record.spread, 1e-3)
            rel = abs(record.constant_inversion / analytic_inversion_constant(mp) - 1.0)
            rec.gate(f"p={p}", "inversion_constant_vs_analytic", rel, 1e-6)
            rec.info(f"p={p}", "constant_inversion", record.constant_inversion)
            rec.info(f"p={p}", "constant_plancherel", record.constant_plancherel)
    finally:
        set_threads(saved)


COMMANDS = {
    "spherical-table": run_spherical_table,
    "c-function": run_c_function,
    "diagram": run_diagram,
    "roundtrip": run_roundtrip,
    "plancherel": run_plancherel,
    "paley-wiener": run_paley_wiener,
    "symmetry-check": run_symmetry_check,
    "cutoff": run_cutoff,
    "seminorm-report": run_seminorm_report,
    "calibrate": run_calibrate,
}

DEFAULT_DIMS = {
    "spherical-table": (2, 3, 4),
    "c-function": (2, 3, 4),
    "diagram": (2, 3),
    "roundtrip": (2, 3),
    "plancherel": (2, 3),
    "paley-wiener": (2, 3),
    "symmetry-check": (2, 3),
    "cutoff": (3,),
    "seminorm-report": (2, 3),
    "calibrate": (2, 3),
}

ANY_DIMENSION = {"spherical-table", "c-function"}


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    status: int
    recorder: Recorder | None
    report: dict


def _write_outputs(out: Path, rec: Recorder | None, report: dict):
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    if rec is None:
        return
    (out / "results.csv").write_text(rec.csv_text(), encoding="utf-8")
    timing = {"schema": SCHEMA, "experiment": rec.experiment,
              "laps": [{"label": k, "seconds": v} for k, v in rec.timings]}
    (out / "timing.json").write_text(json.dumps(timing, indent=2) + "\n", encoding="utf-8")
    plots = out / "plotdata"
    plots.mkdir(exist_ok=True)
    for name, (x, y) in sorted(rec.plots.items()):
        lines = [f"{_fmt(a)} {_fmt(b)}" for a, b in zip(x, y)]
        (plots / f"{name}.dat").write_text("# x y\n" + "\n".join(lines) + "\n", encoding="utf-8")


def run(experiment: str, config: dict | None = None, out: str | os.PathLike | None = None,
        threads: int = 1) -> RunResult:
    """Run one command and write its artifacts; returns the exit status and the recorder."""
    out = Path(out or os.environ.get("HYPERHARM_OUT") or Path("hyperharm-out") / experiment)
    saved = get_threads()
    set_threads(threads)
    rec = None
    try:
        if experiment not in COMMANDS:
            raise ConfigError(f"unknown command '{experiment}'")
        cfg = RunConfig.from_dict(experiment, config)
        rec = Recorder(experiment)
        registry = CalibrationRegistry(out / "calibration")
        COMMANDS[experiment](cfg, rec, registry)
        gates = rec.gates
        report = {
            "schema": SCHEMA,
            "experiment": experiment,
            "config": cfg.as_dict(),
            "passed": rec.passed,
            "n_gates": len(gates),
            "n_failed": sum(r[6] == "0" for r in gates),
            "failed": [{"case": r[1], "quantity": r[2], "value": r[3], "relation": r[4], "tolerance": r[5]}
                       for r in gates if r[6] == "0"],
            "plots": sorted(rec.plots),
        }
        status = 0 if rec.passed else 1
    except Exception as exc:  # every failure becomes a machine-readable record
        log.error("%s failed: %s", experiment, exc)
        report = {"schema": SCHEMA, "experiment": experiment, "passed": False,
                  "error": {"type": type(exc).__name__, "message": str(exc)}}
        status = 2
        rec = None
    finally:
        set_threads(saved)
    _write_outputs(out, rec, report)
    return RunResult(status, rec, report)


def build_parser():
    parser = argparse.ArgumentParser(prog="hyperharm", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="output directory (default: $HYPERHARM_OUT or ./hyperharm-out/<command>)")
    parser.add_argument("--threads", type=int, default=1, help="worker threads (results do not depend on it)")
    parser.add_argument("--verbose", action="store_true", help="log every gate to stderr")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s", stream=sys.stderr)
    config = None
    if args.config is not None:
        try:
            config = json.loads(args.config.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            out = args.out or Path("hyperharm-out") / args.command
            _write_outputs(Path(out), None, {"schema": SCHEMA, "experiment": args.command, "passed": False,
                                             "error": {"type": type(exc).__name__, "message": str(exc)}})
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return 2
    result = run(args.command, config, args.out, args.threads)
    if result.status == 2:
        print(f"error: {result.report['error']['message']}", file=sys.stderr)
    elif result.recorder is not None:
        gates = result.recorder.gates
        failed = sum(r[6] == "0" for r in gates)
        print(f"{args.command}: {len(gates) - failed}/{len(gates)} gates passed")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
