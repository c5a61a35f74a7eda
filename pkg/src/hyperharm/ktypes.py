"""K-types on the boundary sphere, projections and the symmetry polynomials.

Boundary functions are stored by harmonic coefficients, grouped by K-type.
For ``p = 2`` the K-type with label ``m`` acts on the Fourier mode
``exp(-i m phi)`` (the action is ``(k . f)(b) = f(k^{-1} b)``), and the
boundary point with angle ``phi`` is ``(sin phi, cos phi)``.  For ``p = 3``
the label is the degree ``l`` and the block holds the ``2l + 1`` real
spherical harmonics ordered ``m = 0, 1, -1, 2, -2, ...``.  In both cases
the basis is orthonormal for the probability measure on the sphere and its
first element is the one fixed by rotations about ``e_p``.

For ``p >= 4`` only the trivial K-type is available.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy.special import sph_harm_y

from .geometry import ModelParams, sphere_rule
from .numerics import Polynomial, divided_difference

__all__ = [
    "UnsupportedDimensionError",
    "TruncationError",
    "SymmetryError",
    "KTypeIndex",
    "trivial",
    "harmonic_block",
    "delta_matrix",
    "casimir_eigenvalue",
    "BoundaryFunction",
    "MatrixBoundaryFunction",
    "project_ktype",
    "project_matrix",
    "trace_map",
    "evaluate_at_base",
    "extend_from_base",
    "pdelta",
    "SymmetryReport",
    "check_pdelta_reflection",
    "mul_pdelta",
    "divide_pdelta",
    "DEFAULT_LMAX",
]

DEFAULT_LMAX = 16


class UnsupportedDimensionError(ValueError):
    """K-type machinery requested for a dimension it does not cover."""


class TruncationError(ValueError):
    """Requested K-type exceeds the harmonic truncation degree."""


class SymmetryError(ValueError):
    """Input violates a required symmetry (evenness, p_delta reflection)."""


@dataclass(frozen=True)
class KTypeIndex:
    """A K-type with an M-fixed vector.

    Parameters
    ----------
    p : int
        Dimension of the hyperbolic space.
    label : int
        Mode ``m`` for ``p = 2`` (any integer), degree ``l >= 0`` for ``p = 3``,
        and ``0`` for ``p >= 4``.
    """

    p: int
    label: int = 0

    def __post_init__(self):
        if self.p == 3 and self.label < 0:
            raise ValueError("degree must be >= 0")
        if self.p >= 4 and self.label != 0:
            raise UnsupportedDimensionError("only the trivial K-type is supported for p >= 4")
        if self.p < 2:
            raise ValueError("p must be >= 2")

    @property
    def degree(self) -> int:
        """Harmonic degree ``|m|`` or ``l``."""
        return abs(self.label)

    @property
    def dim(self) -> int:
        return 2 * self.label + 1 if self.p == 3 else 1

    @property
    def s(self) -> int:
        """Degree of the symmetry polynomial."""
        return self.degree

    @property
    def contragredient(self) -> "KTypeIndex":
        if self.p == 2:
            return KTypeIndex(2, -self.label)
        return self

    @property
    def is_trivial(self) -> bool:
        return self.label == 0

    def __str__(self):
        return f"m={self.label}" if self.p == 2 else f"l={self.label}"


def trivial(p):
    return KTypeIndex(p, 0)


def _sh_order(ell):
    ms = [0]
    for m in range(1, ell + 1):
        ms += [m, -m]
    return ms


def harmonic_block(delta: KTypeIndex, points):
    """Basis functions of the K-type `delta` at boundary points.

    Parameters
    ----------
    points : array_like, shape (N, p)

    Returns
    -------
    ndarray, shape (dim, N)
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if delta.p == 2:
        phi = np.arctan2(pts[:, 0], pts[:, 1])
        return np.exp(-1j * delta.label * phi)[None, :]
    if delta.p == 3:
        ell = delta.label
        z = np.clip(pts[:, 2], -1.0, 1.0)
        theta = np.arccos(z)
        phi = np.arctan2(pts[:, 1], pts[:, 0])
        scale = math.sqrt(4.0 * math.pi)
        out = np.empty((2 * ell + 1, pts.shape[0]))
        for j, m in enumerate(_sh_order(ell)):
            y = sph_harm_y(ell, abs(m), theta, phi)
            # undo the Condon-Shortley sign carried by the complex harmonics
            sign = (-1) ** abs(m)
            if m == 0:
                out[j] = scale * y.real
            elif m > 0:
                out[j] = scale * math.sqrt(2.0) * sign * y.real
            else:
                out[j] = scale * math.sqrt(2.0) * sign * y.imag
        return out
    return np.ones((1, pts.shape[0]))


# ---------------------------------------------------------------------------
# Representation matrices
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def _angular_momentum(ell):
    ms = np.arange(ell, -ell - 1, -1, dtype=float)
    jp = np.zeros((2 * ell + 1, 2 * ell + 1))
    for i in range(1, 2 * ell + 1):
        m = ms[i]
        jp[i - 1, i] = math.sqrt(ell * (ell + 1) - m * (m + 1))
    jy = (jp - jp.T) / 2j
    evals, evecs = np.linalg.eigh(jy)
    return ms, evals, evecs


@lru_cache(maxsize=64)
def _real_from_complex(ell):
    """Matrix ``U`` with ``Y_real = U @ Y_complex`` (complex ordered m = l..-l, CS phase)."""
    ms = list(range(ell, -ell - 1, -1))
    col = {m: i for i, m in enumerate(ms)}
    u = np.zeros((2 * ell + 1, 2 * ell + 1), dtype=complex)
    for j, m in enumerate(_sh_order(ell)):
        a = abs(m)
        if m == 0:
            u[j, col[0]] = 1.0
        elif m > 0:
            # sqrt2 (-1)^m Re Y_m = ((-1)^m Y_m + Y_{-m}) / sqrt2
            u[j, col[a]] = (-1) ** a / math.sqrt(2.0)
            u[j, col[-a]] = 1.0 / math.sqrt(2.0)
        else:
            u[j, col[a]] = (-1) ** a / (1j * math.sqrt(2.0))
            u[j, col[-a]] = -1.0 / (1j * math.sqrt(2.0))
    return u


def _euler_zyz(k):
    beta = math.acos(max(-1.0, min(1.0, k[2, 2])))
    if abs(math.sin(beta)) > 1e-12:
        alpha = math.atan2(k[1, 2], k[0, 2])
        gamma = math.atan2(k[2, 1], -k[2, 0])
    else:
        alpha = math.atan2(k[1, 0], k[0, 0]) if k[2, 2] > 0 else math.atan2(-k[1, 0], -k[0, 0])
        gamma = 0.0
    return alpha, beta, gamma


def delta_matrix(delta: KTypeIndex, k):
    """Matrix of ``(k . Y_j)(b) = Y_j(k^{-1} b)`` in the block basis.

    Entry ``(i, j)`` is the ``Y_i`` coefficient of ``k . Y_j``, so that
    ``k . Y_j = sum_i D[i, j] Y_i``.
    """
    k = np.asarray(k, dtype=float)
    if delta.p == 2:
        # k maps angle phi to phi + theta
        theta = math.atan2(k[0, 1], k[0, 0])
        return np.array([[np.exp(1j * delta.label * theta)]])
    if delta.p == 3:
        ell = delta.label
        if ell == 0:
            return np.ones((1, 1))
        ms, evals, evecs = _angular_momentum(ell)
        a, b, g = _euler_zyz(k)
        ry = evecs @ np.diag(np.exp(-1j * b * evals)) @ evecs.conj().T
        wig = np.exp(-1j * a * ms)[:, None] * ry * np.exp(-1j * g * ms)[None, :]
        u = _real_from_complex(ell)
        # k . Y_m = sum_m' Y_m' wig[m', m]; change to the real basis
        d = u.conj() @ wig @ u.T
        return d.real
    return np.ones((1, 1))


def casimir_eigenvalue(delta: KTypeIndex) -> float:
    """Eigenvalue of the boundary Laplacian on the K-type (non-positive)."""
    ell = delta.degree
    return -float(ell * (ell + delta.p - 2))


# ---------------------------------------------------------------------------
# Boundary functions
# ---------------------------------------------------------------------------

def _labels(p, lmax):
    if p == 2:
        return list(range(-lmax, lmax + 1))
    if p == 3:
        return list(range(lmax + 1))
    return [0]


@dataclass(frozen=True)
class BoundaryFunction:
    """Function on ``S^{p-1}`` given by K-type blocks of harmonic coefficients.

    ``coefficients[label]`` has shape ``(dim, *extra)``; extra trailing axes
    carry any other variable (radius, spectral parameter).  Missing labels
    are zero.
    """

    p: int
    coefficients: dict = field(default_factory=dict)
    lmax: int = DEFAULT_LMAX

    def block(self, label, extra_shape=()):
        if label in self.coefficients:
            return self.coefficients[label]
        dim = KTypeIndex(self.p, label).dim
        return np.zeros((dim,) + tuple(extra_shape), dtype=complex)

    def evaluate(self, points):
        """Synthesize values at boundary points; returns shape ``(N, *extra)``."""
        pts = np.atleast_2d(points)
        out = None
        for label, c in sorted(self.coefficients.items()):
            basis = harmonic_block(KTypeIndex(self.p, label), pts)
            val = np.tensordot(basis.T, c, axes=([1], [0]))
            out = val if out is None else out + val
        if out is None:
            return np.zeros(pts.shape[0])
        return out

    @classmethod
    def from_samples(cls, p, func, lmax=DEFAULT_LMAX, n_polar=None):
        """Harmonic analysis of a callable ``func(points) -> values`` by quadrature."""
        if p not in (2, 3):
            raise UnsupportedDimensionError("harmonic analysis needs p in {2, 3}")
        pts, w = sphere_rule(p, n_polar or (lmax + 8))
        vals = np.asarray(func(pts))
        coeffs = {}
        for label in _labels(p, lmax):
            basis = harmonic_block(KTypeIndex(p, label), pts)
            coeffs[label] = np.tensordot(basis.conj() * w, vals, axes=([1], [0]))
        return cls(p, coeffs, lmax)

    def inner(self, other):
        """``int_B f conj(g) db`` from coefficients."""
        total = 0j
        for label, c in self.coefficients.items():
            if label in other.coefficients:
                total += np.sum(c * np.conj(other.coefficients[label]))
        return total


def project_ktype(f, delta: KTypeIndex):
    """Keep only the `delta` block of an object carrying ``coefficients``.

    Works for :class:`BoundaryFunction` and for the spatial and spectral
    function types of :mod:`hyperharm.transforms`.
    """
    lmax = getattr(f, "lmax", DEFAULT_LMAX)
    if delta.degree > lmax:
        raise TruncationError(f"K-type {delta} exceeds truncation degree {lmax}")
    kept = {delta.label: f.coefficients[delta.label]} if delta.label in f.coefficients else {}
    return replace(f, coefficients=kept)


@dataclass(frozen=True)
class MatrixBoundaryFunction:
    """``Hom(V_delta, V_delta)``-valued function on the boundary.

    ``tensor[a, b, i, ...]`` is the coefficient of ``conj(Y_i)`` in entry
    ``(a, b)``, where ``Y_i`` runs over the basis of ``delta``.  The
    functions ``conj(Y_i)`` span the contragredient K-type.
    """

    delta: KTypeIndex
    tensor: np.ndarray

    def evaluate(self, points):
        basis = harmonic_block(self.delta, points).conj()  # (d, N)
        return np.moveaxis(np.tensordot(self.tensor, basis, axes=([2], [0])), -1, 0)


def _contragredient_coefficients(f, delta):
    """Coefficients of ``f`` on the basis ``conj(Y^delta_i)``."""
    dual = delta.contragredient
    c = f.coefficients.get(dual.label)
    if c is None:
        return None
    if delta.p == 2:
        return c  # conj(exp(-i m phi)) = exp(i m phi) is already the dual basis
    return c  # real harmonics: the dual basis equals the basis


def project_matrix(f, delta: KTypeIndex) -> MatrixBoundaryFunction:
    """The equivariant matrix function ``d int_K delta(k) f(k^{-1} b) dk``.

    By Schur orthogonality only the contragredient block of `f` survives and
    entry ``(a, b)`` equals ``c_b conj(Y_a)``; no K-quadrature is needed.
    """
    lmax = getattr(f, "lmax", DEFAULT_LMAX)
    if delta.degree > lmax:
        raise TruncationError(f"K-type {delta} exceeds truncation degree {lmax}")
    d = delta.dim
    c = _contragredient_coefficients(f, delta)
    if c is None:
        extra = ()
        for v in f.coefficients.values():
            extra = v.shape[1:]
            break
        c = np.zeros((d,) + extra, dtype=complex)
    c = np.asarray(c)
    tensor = np.zeros((d, d, d) + c.shape[1:], dtype=np.result_type(c, complex))
    for a in range(d):
        tensor[a, :, a] = c
    return MatrixBoundaryFunction(delta, tensor)


def trace_map(F: MatrixBoundaryFunction) -> BoundaryFunction:
    """Pointwise trace; lands in the contragredient K-type."""
    d = F.delta.dim
    c = sum(F.tensor[a, a] for a in range(d))
    return BoundaryFunction(F.delta.p, {F.delta.contragredient.label: c}, max(F.delta.degree, 0) or DEFAULT_LMAX)


@lru_cache(maxsize=64)
def _basis_at_pole(delta):
    p = delta.p
    pole = np.zeros((1, p))
    pole[0, -1] = 1.0
    return harmonic_block(delta, pole)[:, 0]


def evaluate_at_base(F: MatrixBoundaryFunction):
    """The row ``F(eM)[0, :]`` (all other rows vanish for equivariant F)."""
    y0 = _basis_at_pole(F.delta).conj()
    return np.tensordot(F.tensor, y0, axes=([2], [0]))[0]


def extend_from_base(row, delta: KTypeIndex) -> MatrixBoundaryFunction:
    """Equivariant extension ``F(k eM) = delta(k) F(eM)`` of a base row."""
    row = np.asarray(row)
    d = delta.dim
    scale = _basis_at_pole(delta)[0].real  # sqrt(d)
    tensor = np.zeros((d, d, d) + row.shape[1:], dtype=np.result_type(row, complex))
    for a in range(d):
        tensor[a, :, a] = row / scale
    return MatrixBoundaryFunction(delta, tensor)


# ---------------------------------------------------------------------------
# Symmetry polynomials
# ---------------------------------------------------------------------------

def pdelta(delta: KTypeIndex, mp: ModelParams) -> Polynomial:
    """``p_delta(nu) = (nu + rho)(nu + rho + 1) ... (nu + rho + s - 1)``."""
    if mp.p not in (2, 3):
        raise UnsupportedDimensionError("p_delta is available for p in {2, 3}")
    return Polynomial.from_roots([-(mp.rho + j) for j in range(delta.s)])


@dataclass(frozen=True)
class SymmetryReport:
    """Outcome of a symmetry check."""

    mode: str
    residual: float
    scale: float
    tolerance: float

    @property
    def relative(self) -> float:
        return self.residual / self.scale if self.scale > 0 else self.residual

    @property
    def passed(self) -> bool:
        return self.relative <= self.tolerance


def _mirror_index(values):
    """Index map ``nu -> -nu`` on a grid; raises if the grid is not symmetric."""
    nus = np.asarray(values, dtype=complex).ravel()
    order = np.lexsort((nus.imag, nus.real))
    mirrored = -nus
    order_m = np.lexsort((mirrored.imag, mirrored.real))
    idx = np.empty(nus.size, dtype=int)
    idx[order] = order_m
    scale = max(1.0, float(np.max(np.abs(nus))))
    if np.max(np.abs(nus[idx] + nus)) > 1e-12 * scale:
        raise SymmetryError("spectral grid is not symmetric under nu -> -nu")
    return idx


def check_pdelta_reflection(values, nus, delta: KTypeIndex, mp: ModelParams, tol=1e-8) -> SymmetryReport:
    """Residual of ``p(-nu) F(-nu) = p(nu) F(nu)``.

    `values` has shape ``(..., *nus.shape)``; the report carries the
    maximal entrywise residual and the scale ``max |p(nu) F(nu)|``.
    """
    nus = np.asarray(nus, dtype=complex)
    vals = np.asarray(values).reshape(np.shape(values)[: np.ndim(values) - nus.ndim] + (nus.size,))
    idx = _mirror_index(nus)
    poly = pdelta(delta, mp)
    lhs = poly(-nus.ravel()) * vals[..., idx]
    rhs = poly(nus.ravel()) * vals
    resid = float(np.max(np.abs(lhs - rhs))) if vals.size else 0.0
    scale = float(np.max(np.abs(rhs))) if vals.size else 0.0
    return SymmetryReport("pdelta", resid, scale, tol)


def _even_residual(values, nus):
    nus = np.asarray(nus, dtype=complex)
    vals = np.asarray(values).reshape(np.shape(values)[: np.ndim(values) - nus.ndim] + (nus.size,))
    idx = _mirror_index(nus)
    resid = float(np.max(np.abs(vals[..., idx] - vals))) if vals.size else 0.0
    return resid, float(np.max(np.abs(vals))) if vals.size else 0.0


def mul_pdelta(G, nus, delta: KTypeIndex, mp: ModelParams, tol=1e-10):
    """``F(nu) = p_delta(-nu) G(nu)`` for an even sampled ``G``."""
    resid, scale = _even_residual(G, nus)
    if resid > tol * max(scale, 1e-300):
        raise SymmetryError(f"G is not even: residual {resid:.3e}")
    return pdelta(delta, mp)(-np.asarray(nus, dtype=complex)) * np.asarray(G)


def divide_pdelta(F, nus, delta: KTypeIndex, mp: ModelParams, root_tol=1e-8, stencil=10):
    """``G(nu) = F(nu) / p_delta(-nu)`` on one sampled line.

    `nus` must be a uniformly spaced line (1-d).  Roots of ``p_delta(-nu)``
    on or next to the line are removed with :func:`divided_difference`,
    which requires ``F`` to vanish there.
    """
    nus = np.asarray(nus, dtype=complex)
    out = np.asarray(F, dtype=complex)
    step = nus[1] - nus[0]
    for j in range(delta.s):
        root = mp.rho + j
        pos = (root - nus[0]) / step
        on_line = abs(pos.imag) < 1e-9 and -1 <= pos.real <= nus.size
        factor = root - nus  # p(-nu) = prod (rho + j - nu)
        if on_line:
            q = divided_difference(out, nus, root, tol=root_tol * max(1.0, float(np.max(np.abs(out)))),
                                   stencil=stencil)
            out = -q  # (F - F(root)) / (nu - root) = -F / (root - nu)
        else:
            out = out / factor
    return out
