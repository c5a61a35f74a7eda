"""Special functions and deterministic quadrature.

Everything here works on plain Python/numpy complex numbers.  Reductions
go through :func:`compensated_sum`, which walks the summation axis in a
fixed order so results do not depend on how the caller split the work.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from functools import lru_cache
from scipy.special import roots_legendre

__all__ = [
    "PoleError",
    "ConvergenceError",
    "LengthMismatchError",
    "NonvanishingRootError",
    "NonFiniteError",
    "check_finite",
    "gamma_ln",
    "rgamma",
    "hyp2f1",
    "QuadratureRule",
    "gauss_legendre",
    "trapezoid",
    "gregory",
    "compensated_sum",
    "integrate",
    "fd_weights",
    "divided_difference",
    "Polynomial",
    "DEFAULT_STEP",
    "DEFAULT_GL_ORDER",
]

DEFAULT_STEP = 1.0 / 256
DEFAULT_GL_ORDER = 64
SERIES_CAP = 10_000


class PoleError(ArithmeticError):
    """Argument sits on a pole of the Gamma function."""


class ConvergenceError(ArithmeticError):
    """A series did not reach tolerance within the iteration cap."""


class LengthMismatchError(ValueError):
    """Samples and quadrature nodes disagree in length."""


class NonvanishingRootError(ValueError):
    """A divided difference was requested at a point where the data do not vanish."""


class NonFiniteError(FloatingPointError):
    """A NaN or infinity showed up where a finite value is required."""


def check_finite(value, name="value"):
    """Raise :class:`NonFiniteError` if `value` has a NaN or inf entry."""
    arr = np.asarray(value)
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return value


# ---------------------------------------------------------------------------
# Gamma function
# ---------------------------------------------------------------------------

# B_{2k} / (2k (2k-1)) for k = 1..12
_STIRLING = [
    1.0 / 12,
    -1.0 / 360,
    1.0 / 1260,
    -1.0 / 1680,
    1.0 / 1188,
    -691.0 / 360360,
    1.0 / 156,
    -3617.0 / 122400,
    43867.0 / 244188,
    -174611.0 / 125400,
    77683.0 / 5796,
    -236364091.0 / 1506960,
]
_SHIFT_TO = 16.0
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def _is_pole(z):
    z = np.asarray(z, dtype=complex)
    return (z.imag == 0) & (z.real <= 0) & (z.real == np.round(z.real))


def gamma_ln(z):
    """Logarithm of the Gamma function for complex arguments.

    The value is the analytic continuation of ``log Gamma`` from the
    positive real axis (the branch used by ``scipy.special.loggamma``),
    obtained by shifting the argument to ``Re z >= 16`` with the recursion
    ``Gamma(z + 1) = z Gamma(z)`` and summing the Stirling series there.

    Parameters
    ----------
    z : complex or array_like
        Argument; must avoid the non-positive integers.

    Returns
    -------
    complex or ndarray

    Raises
    ------
    PoleError
        If any entry is a non-positive integer.
    """
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if np.any(_is_pole(z)):
        raise PoleError("log Gamma has a pole at non-positive integers")
    check_finite(z, "gamma_ln argument")
    shift = np.maximum(0, np.ceil(_SHIFT_TO - z.real)).astype(int)
    w = z + shift
    # log of the product z (z+1) ... (z+shift-1), one principal log at a time
    corr = np.zeros_like(z)
    for k in range(int(shift.max(initial=0))):
        active = shift > k
        corr[active] += np.log(z[active] + k)
    inv = 1.0 / w
    inv2 = inv * inv
    series = np.zeros_like(w)
    for coef in reversed(_STIRLING):
        series = series * inv2 + coef
    out = (w - 0.5) * np.log(w) - w + _HALF_LOG_2PI + series * inv - corr
    return complex(out[0]) if scalar else out


def rgamma(z):
    """Reciprocal Gamma function, equal to zero at the poles of Gamma."""
    scalar = np.ndim(z) == 0
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    out = np.zeros_like(z)
    ok = ~_is_pole(z)
    if np.any(ok):
        out[ok] = np.exp(-gamma_ln(z[ok]))
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Gauss hypergeometric function on x <= 0
# ---------------------------------------------------------------------------

def _series(a, b, c, z, tol=1e-17):
    """Partial sums of the Gauss series, vectorized over ``z`` and broadcast parameters."""
    z = np.asarray(z, dtype=float)
    shape = np.broadcast(a, b, c, z).shape
    total = np.ones(shape, dtype=complex)
    comp = np.zeros(shape, dtype=complex)
    term = np.ones(shape, dtype=complex)
    for k in range(SERIES_CAP):
        term = term * ((a + k) * (b + k) / ((c + k) * (k + 1))) * z
        # Neumaier step
        t = total + term
        big = np.abs(total) >= np.abs(term)
        comp += np.where(big, (total - t) + term, (term - t) + total)
        total = t
        # checked every few terms: the test costs more than a term
        if k > 2 and k % 8 == 0 and np.all(np.abs(term) <= tol * np.abs(total)):
            return total + comp
    raise ConvergenceError("hypergeometric series did not converge within the term cap")


def _connection(a, b, c, w):
    """``2F1(a, b; c; 1 - w)`` through the standard ``1 - z`` connection formula.

    Only valid when ``c - a - b`` is not an integer.
    """
    s = c - a - b
    lg_c = gamma_ln(c)
    out = np.zeros(np.shape(w), dtype=complex)
    inv1 = rgamma(c - a) * rgamma(c - b)
    if inv1 != 0:
        coef1 = np.exp(lg_c + gamma_ln(s)) * inv1
        out = out + coef1 * _series(a, b, 1 - s, w)
    inv2 = rgamma(a) * rgamma(b)
    if inv2 != 0:
        coef2 = np.exp(lg_c + gamma_ln(-s)) * inv2
        out = out + coef2 * np.exp(s * np.log(w)) * _series(c - a, c - b, 1 + s, w)
    return out


_CIRCLE_RADIUS = 0.1
_CIRCLE_POINTS = 64


def _connection_shifted(a, b, c, w, shifts):
    """``_connection(a + sh, b + sh, c, w)`` for every shift at once; shape ``(len(shifts), len(w))``.

    Assumes no shifted parameter sits on a Gamma pole, which holds on the
    averaging circle.
    """
    sh = np.asarray(shifts, dtype=complex)[:, None]
    a_s, b_s = a + sh, b + sh
    s = c - a_s - b_s
    w = np.asarray(w, dtype=float)[None, :]
    lg_c = gamma_ln(c)
    coef1 = np.exp(lg_c + gamma_ln(s)) * rgamma(c - a_s) * rgamma(c - b_s)
    coef2 = np.exp(lg_c + gamma_ln(-s)) * rgamma(a_s) * rgamma(b_s)
    return (coef1 * _series(a_s, b_s, 1 - s, w)
            + coef2 * np.exp(s * np.log(w)) * _series(c - a_s, c - b_s, 1 + s, w))


def _near_1(a, b, c, w):
    """``2F1(a, b; c; 1 - w)`` for small ``w``, robust at integer ``c - a - b``.

    When ``c - a - b`` is within 0.1 of an integer the connection formula
    loses its gamma factors to poles.  The function is entire in a shift
    ``(a, b) -> (a + s, b + s)``, so its value equals the mean over a
    circle in ``s``; on that circle ``c - a - b - 2 s`` stays at least 0.1
    away from every integer.
    """
    s = c - a - b
    if abs(s - round(s.real)) >= _CIRCLE_RADIUS:
        return _connection(a, b, c, w)
    k = np.arange(_CIRCLE_POINTS)
    shifts = _CIRCLE_RADIUS * np.exp(2j * np.pi * k / _CIRCLE_POINTS)
    acc = _connection_shifted(a, b, c, w, shifts)
    return compensated_sum(acc, axis=0) / _CIRCLE_POINTS


def _loss_z(a, b, z):
    # peak term of the series in z grows like exp(2 sqrt(|ab| z))
    return 2.0 * np.sqrt(abs(a * b) * z)


def _loss_w(a, b, c, w):
    s = c - a - b
    l1 = abs(a * b / (1 - s)) * w if abs(1 - s) > 0 else np.inf
    l2 = abs((c - a) * (c - b) / (1 + s)) * w if abs(1 + s) > 0 else np.inf
    loss = np.maximum(l1, l2)
    if abs(s - round(s.real)) < _CIRCLE_RADIUS:
        # the circle average cancels terms of size ~ 1 / radius
        loss = loss + math.log(1.0 / _CIRCLE_RADIUS)
    return loss


def hyp2f1(a, b, c, x):
    """Gauss hypergeometric function ``2F1(a, b; c; x)`` for real ``x <= 0``.

    The Pfaff transformation maps ``x`` to ``z = x / (x - 1)`` in ``[0, 1)``.
    Small ``z`` is summed directly.  Close to ``z = 1`` the series slows
    down without bound, so there the ``1 - z`` connection formula is used
    with ``1 - z = 1 / (1 - x)`` computed without cancellation.

    Parameters
    ----------
    a, b, c : complex
        Parameters; ``c`` must not be a non-positive integer.
    x : float or array_like
        Argument(s), all ``<= 0``.

    Returns
    -------
    complex or ndarray of complex

    Raises
    ------
    PoleError
        If ``c`` is a non-positive integer.
    ConvergenceError
        If a series needs more than 10 000 terms.
    """
    a, b, c = complex(a), complex(b), complex(c)
    if _is_pole(c):
        raise PoleError("c must not be a non-positive integer")
    # symmetric code path: the result cannot depend on the order of a and b
    if (b.real, b.imag) < (a.real, a.imag):
        a, b = b, a
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(x > 0):
        raise ValueError("hyp2f1 is implemented for x <= 0 only")
    check_finite(x, "x")
    w = 1.0 / (1.0 - x)  # = 1 - z
    z = -x * w           # = x / (x - 1)
    b1 = c - b
    pref = np.exp(-a * np.log1p(-x))
    use_w = (z > 0.95) | ((w < 0.95) & (_loss_w(a, b1, c, w) < _loss_z(a, b1, z)))
    out = np.empty(x.shape, dtype=complex)
    if np.any(~use_w):
        out[~use_w] = _series(a, b1, c, z[~use_w])
    if np.any(use_w):
        out[use_w] = _near_1(a, b1, c, w[use_w])
    out = pref * out
    check_finite(out, "hyp2f1 result")
    return complex(out[0]) if scalar else out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights of a fixed rule on an interval."""

    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple[float, float]
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.shape != weights.shape or nodes.ndim != 1:
            raise LengthMismatchError("nodes and weights must be 1-d arrays of equal length")
        nodes.setflags(write=False)
        weights.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "domain", (float(self.domain[0]), float(self.domain[1])))

    def __len__(self):
        return self.nodes.size


@lru_cache(maxsize=512)
def _legendre_nodes(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n=DEFAULT_GL_ORDER, a=-1.0, b=1.0):
    """Gauss-Legendre rule with `n` nodes mapped to ``[a, b]``."""
    x, w = _legendre_nodes(int(n))
    half = 0.5 * (b - a)
    return QuadratureRule(half * x + 0.5 * (a + b), half * w, (a, b), f"gauss-legendre-{n}")


def trapezoid(a, b, n=None, step=DEFAULT_STEP):
    """Composite trapezoid rule with `n` intervals (or spacing `step`)."""
    if n is None:
        n = max(1, int(round((b - a) / step)))
    x = np.linspace(a, b, n + 1)
    w = np.full(n + 1, (b - a) / n)
    w[0] *= 0.5
    w[-1] *= 0.5
    return QuadratureRule(x, w, (a, b), f"trapezoid-{n}")


def _bernoulli(m):
    """Bernoulli numbers B_0..B_m (B_1 = -1/2) as floats."""
    from fractions import Fraction

    B = [Fraction(0)] * (m + 1)
    B[0] = Fraction(1)
    for k in range(1, m + 1):
        B[k] = -sum(Fraction(math.comb(k + 1, j)) * B[j] for j in range(k)) / (k + 1)
    return B


def _gregory_corrections(order):
    """Endpoint weight corrections making the trapezoid rule exact to degree ``order - 1``.

    For a monomial ``x**q`` sampled at ``0, 1, 2, ...`` the Euler-Maclaurin
    expansion says the trapezoid sum misses ``B_{q+1} / (q + 1)`` at the
    left end when ``q`` is odd, and nothing for even ``q``.
    """
    B = _bernoulli(order + 1)
    i = np.arange(order, dtype=float)
    V = np.vander(i, order, increasing=True).T
    rhs = np.zeros(order)
    for q in range(1, order, 2):
        rhs[q] = float(B[q + 1]) / (q + 1)
    # the trapezoid sum misses -B_{q+1}/(q+1); the corrections add it back
    return np.linalg.solve(V, rhs)


def gregory(a, b, n=None, step=DEFAULT_STEP, order=8, ends="both"):
    """Trapezoid rule with Gregory end corrections.

    On ``n`` equal intervals the rule integrates polynomials of degree
    below `order` exactly and keeps the uniform nodes of the plain
    trapezoid rule.  Needs ``n >= 2 * order``.

    Parameters
    ----------
    ends : {"both", "left", "right"}
        Endpoints that receive corrections.  Leave an end uncorrected when
        the integrand extends smoothly and evenly across it: the plain
        trapezoid end is then already spectrally accurate, and one-sided
        corrections would only add their own truncation error.
    """
    if ends not in ("both", "left", "right"):
        raise ValueError("ends must be 'both', 'left' or 'right'")
    base = trapezoid(a, b, n=n, step=step)
    n_int = len(base) - 1
    if n_int < 2 * order:
        return base
    h = (b - a) / n_int
    corr = _gregory_corrections(order)
    w = np.array(base.weights)
    if ends in ("both", "left"):
        w[:order] += h * corr
    if ends in ("both", "right"):
        w[-order:] += h * corr[::-1]
    return QuadratureRule(base.nodes, w, (a, b), f"gregory{order}-{n_int}")


def compensated_sum(values, axis=-1):
    """Neumaier-compensated sum along `axis`, in index order."""
    v = np.moveaxis(np.asarray(values), axis, 0)
    if v.shape[0] == 0:
        return np.zeros(v.shape[1:], dtype=v.dtype)
    total = np.array(v[0], dtype=np.result_type(v.dtype, float))
    comp = np.zeros_like(total)
    for item in v[1:]:
        t = total + item
        if np.iscomplexobj(t):
            for part in ("real", "imag"):
                tp, ip, sp = getattr(t, part), getattr(item, part), getattr(total, part)
                big = np.abs(sp) >= np.abs(ip)
                delta = np.where(big, (sp - tp) + ip, (ip - tp) + sp)
                if part == "real":
                    comp = comp + delta
                else:
                    comp = comp + 1j * delta
        else:
            big = np.abs(total) >= np.abs(item)
            comp = comp + np.where(big, (total - t) + item, (item - t) + total)
        total = t
    return total + comp


def integrate(rule, samples):
    """Weighted sum of `samples` against `rule`, compensated and in node order.

    `samples` may carry leading batch axes; the last axis runs over nodes.
    """
    samples = np.asarray(samples)
    if samples.shape[-1] != len(rule):
        raise LengthMismatchError(
            f"{samples.shape[-1]} samples for a rule with {len(rule)} nodes"
        )
    out = compensated_sum(samples * rule.weights, axis=-1)
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Finite differences and divided differences
# ---------------------------------------------------------------------------

def fd_weights(offsets, order):
    """Finite-difference weights for derivative `order` at 0 (Fornberg)."""
    x = np.asarray(offsets, dtype=float)
    n = x.size
    c = np.zeros((n, order + 1))
    c1, c4 = 1.0, x[0]
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5 = 1.0, c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


def divided_difference(values, nus, nu0, tol=1e-8, near=1e-6, stencil=4):
    """Quotient ``(h(nu) - h(nu0)) / (nu - nu0)`` on a sampled line.

    Parameters
    ----------
    values : array_like
        Samples ``h(nus)``; extra leading axes are carried along.
    nus : array_like of complex
        Uniformly spaced sample points on a line in the complex plane.
    nu0 : complex
        Point where ``h`` must vanish; on the grid or within one cell of it.
    tol : float
        Largest accepted ``|h(nu0)|``.
    near : float
        Grid points closer than this to ``nu0`` receive the derivative
        ``h'(nu0)`` instead of the quotient.
    stencil : int
        Points per side of the centered difference used for ``h'(nu0)``.

    Returns
    -------
    ndarray of complex

    Raises
    ------
    NonvanishingRootError
        If ``|h(nu0)| > tol``.
    """
    values = np.asarray(values, dtype=complex)
    nus = np.asarray(nus, dtype=complex)
    step = nus[1] - nus[0]
    pos = (nu0 - nus[0]) / step
    if abs(pos.imag) > 1e-9 * max(1.0, abs(pos)) or not (-1 <= pos.real <= nus.size):
        raise ValueError("nu0 must lie on the sampled line within one grid cell")
    k0 = int(round(pos.real))
    on_grid = abs(pos.real - k0) * abs(step) <= near and 0 <= k0 < nus.size
    if on_grid:
        h0 = values[..., k0]
    else:
        # interpolate h(nu0) from the neighbours with a local Lagrange stencil
        lo = max(0, min(nus.size - 2 * stencil, int(np.floor(pos.real)) - stencil + 1))
        idx = np.arange(lo, lo + 2 * stencil)
        wts = fd_weights(idx - pos.real, 0)
        h0 = np.tensordot(values[..., idx], wts, axes=([-1], [0]))
    if np.max(np.abs(h0)) > tol:
        raise NonvanishingRootError(f"|h(nu0)| = {np.max(np.abs(h0)):.3e} exceeds {tol:.1e}")
    diff = nus - nu0
    out = np.empty_like(values)
    far = np.abs(diff) > near
    out[..., far] = (values[..., far] - h0[..., None] if np.ndim(h0) else values[..., far] - h0) / diff[far]
    close = np.nonzero(~far)[0]
    if close.size:
        lo = max(0, min(nus.size - (2 * stencil + 1), k0 - stencil))
        idx = np.arange(lo, lo + 2 * stencil + 1)
        wts = fd_weights(idx - pos.real, 1) / step
        deriv = np.tensordot(values[..., idx], wts, axes=([-1], [0]))
        for k in close:
            out[..., k] = deriv
    return out


# ---------------------------------------------------------------------------
# Polynomials
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Polynomial:
    """Polynomial with complex coefficients in ascending degree."""

    coefficients: tuple

    def __post_init__(self):
        coef = [complex(c) for c in self.coefficients] or [0j]
        while len(coef) > 1 and coef[-1] == 0:
            coef.pop()
        object.__setattr__(self, "coefficients", tuple(coef))

    @classmethod
    def from_roots(cls, roots, lead=1.0):
        coef = np.array([complex(lead)])
        for r in roots:
            coef = np.convolve(coef, [-complex(r), 1.0])
        return cls(tuple(coef))

    @property
    def degree(self):
        return len(self.coefficients) - 1

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        out = np.zeros_like(x)
        for c in reversed(self.coefficients):
            out = out * x + c
        return out[()] if out.ndim == 0 else out

    def __mul__(self, other):
        return Polynomial(tuple(np.convolve(self.coefficients, other.coefficients)))

    def reflect(self):
        """The polynomial ``x -> p(-x)``."""
        return Polynomial(tuple(c * (-1) ** k for k, c in enumerate(self.coefficients)))

    def roots(self):
        if self.degree < 1:
            return np.array([], dtype=complex)
        return np.roots(self.coefficients[::-1])
