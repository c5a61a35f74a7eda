"""Models of real hyperbolic space and the horocycle bracket.

Three coordinate systems are supported for ``H^p``:

* ``polar``: geodesic distance ``t`` from the origin and a unit direction,
* ``ball``: the Poincare ball, with the origin at the centre,
* ``halfspace``: upper half-space ``(y, x)``, ``y > 0``.

The half-space is attached to the ball so that the boundary point at
infinity is the north pole ``e_p = (0, ..., 0, 1)`` of the ball.  That
pole is the base boundary point, and ``a_t . o`` is the ball point
``tanh(t / 2) e_p``.  With these choices the horocycle bracket is
``A(x, e_p) = log y``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numerics import gauss_legendre

__all__ = [
    "BoundaryDegeneracyError",
    "ModelParams",
    "HyperbolicPoint",
    "BoundaryPoint",
    "horocycle_bracket",
    "polar_distance",
    "volume_weight",
    "sphere_area",
    "horocyclic_compose",
    "convert",
    "north_pole",
    "rotation_to_axis",
    "random_rotation",
    "rotate",
    "sphere_rule",
    "poisson_axis_rule",
    "alpha_nodes",
]

_BALL_EDGE = 1.0 - 1e-14
_Y_FLOOR = 1e-300


class BoundaryDegeneracyError(ValueError):
    """Point is too close to the ideal boundary to be represented."""


@dataclass(frozen=True)
class ModelParams:
    """Dimension data of ``H^p``: ``n = p - 1`` and ``rho = n / 2``."""

    p: int

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError("p must be an integer >= 2")
        object.__setattr__(self, "p", int(self.p))

    @property
    def n(self) -> int:
        return self.p - 1

    @property
    def rho(self) -> float:
        return 0.5 * self.n


def north_pole(p):
    e = np.zeros(p)
    e[-1] = 1.0
    return e


@dataclass(frozen=True)
class BoundaryPoint:
    """Unit vector on ``S^{p-1}``."""

    vec: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vec, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0:
            raise ValueError("boundary point needs a nonzero vector")
        v = v / norm
        v.setflags(write=False)
        object.__setattr__(self, "vec", v)

    @property
    def p(self):
        return self.vec.size


@dataclass(frozen=True)
class HyperbolicPoint:
    """A point of ``H^p`` in one of the three models.

    Use the ``polar``, ``ball`` and ``halfspace`` constructors rather than
    filling the fields by hand.
    """

    model: str
    coords: tuple

    @classmethod
    def polar(cls, t, omega):
        omega = np.asarray(omega, dtype=float)
        if t < 0:
            raise ValueError("polar radius must be >= 0")
        norm = np.linalg.norm(omega)
        omega = omega / norm if norm > 0 else north_pole(omega.size)
        omega.setflags(write=False)
        return cls("polar", (float(t), omega))

    @classmethod
    def ball(cls, x):
        x = np.array(x, dtype=float)
        if np.linalg.norm(x) >= _BALL_EDGE:
            raise BoundaryDegeneracyError("ball point too close to the unit sphere")
        x.setflags(write=False)
        return cls("ball", (x,))

    @classmethod
    def halfspace(cls, y, x):
        x = np.array(x, dtype=float)
        if not y > _Y_FLOOR:
            raise BoundaryDegeneracyError("half-space height must exceed 1e-300")
        x.setflags(write=False)
        return cls("halfspace", (float(y), x))

    @property
    def p(self):
        if self.model == "halfspace":
            return self.coords[1].size + 1
        return self.coords[-1].size

    def to_ball(self):
        return convert(self, "ball")

    def ball_vector(self):
        """Ball-model coordinates as a plain array."""
        return convert(self, "ball").coords[0]


def _ball_from_polar(t, omega):
    return math.tanh(0.5 * t) * omega


def _polar_from_ball(z):
    r = np.linalg.norm(z)
    if r == 0:
        return 0.0, north_pole(z.size)
    return 2.0 * math.atanh(r), z / r


def _halfspace_from_ball(z):
    zp = z[-1]
    zt = z[:-1]
    # |z - e_p|^2 written without cancellation near the pole
    den = float(zt @ zt) + (1.0 - zp) ** 2
    y = (1.0 - float(z @ z)) / den
    return y, 2.0 * zt / den


def _ball_from_halfspace(y, x):
    xx = float(x @ x)
    den = xx + (y + 1.0) ** 2
    z = np.empty(x.size + 1)
    z[:-1] = 2.0 * x / den
    z[-1] = (xx + y * y - 1.0) / den
    return z


def convert(x: HyperbolicPoint, target: str) -> HyperbolicPoint:
    """Re-express `x` in the `target` model (``polar``, ``ball`` or ``halfspace``)."""
    if target not in ("polar", "ball", "halfspace"):
        raise ValueError(f"unknown model {target!r}")
    if x.model == target:
        return x
    if x.model == "polar":
        z = _ball_from_polar(*x.coords)
    elif x.model == "halfspace":
        z = _ball_from_halfspace(*x.coords)
    else:
        z = x.coords[0]
    if target == "ball":
        return HyperbolicPoint.ball(z)
    if target == "polar":
        if x.model == "halfspace":
            # distance from the origin (y=1, x=0) straight from half-space data
            y, xv = x.coords
            cosh_d = (float(xv @ xv) + y * y + 1.0) / (2.0 * y)
            t = math.acosh(max(cosh_d, 1.0))
            _, omega = _polar_from_ball(z)
            return HyperbolicPoint.polar(t, omega)
        return HyperbolicPoint.polar(*_polar_from_ball(z))
    if np.linalg.norm(z) >= _BALL_EDGE:
        raise BoundaryDegeneracyError("ball point too close to the unit sphere")
    return HyperbolicPoint.halfspace(*_halfspace_from_ball(z))


def polar_distance(x: HyperbolicPoint) -> float:
    """Geodesic distance from the origin."""
    if x.model == "polar":
        return x.coords[0]
    return convert(x, "polar").coords[0]


def horocycle_bracket(x: HyperbolicPoint, b: BoundaryPoint, mp: ModelParams | None = None) -> float:
    """Signed distance ``A(x, b)`` from the origin to the horocycle through `x` centred at `b`.

    Computed in the ball model as ``log((1 - |x|^2) / |x - b|^2)``.
    """
    if x.model == "polar":
        t, omega = x.coords
        # 1 - |z|^2 and |z - b|^2 in terms of t avoid loss near the boundary
        # cosh t - <omega, b> sinh t, rewritten without cancellation for b near omega
        gap = omega - b.vec
        return -math.log(math.exp(-t) + 0.5 * float(gap @ gap) * math.sinh(t))
    z = x.ball_vector()
    diff = z - b.vec
    return math.log((1.0 - float(z @ z)) / float(diff @ diff))


def volume_weight(t, mp: ModelParams):
    """Radial density ``sinh(t)**n`` of the invariant measure in polar coordinates."""
    return np.sinh(np.asarray(t, dtype=float)) ** mp.n


def sphere_area(p):
    """Surface area of the unit sphere ``S^{p-1}`` in ``R^p``."""
    return 2.0 * math.pi ** (0.5 * p) / math.gamma(0.5 * p)


def horocyclic_compose(t, xvec, mp: ModelParams | None = None) -> HyperbolicPoint:
    """The point ``a_t n_x . o`` in polar form.

    In the half-space it is ``(e^t, e^t x)``; its distance ``d`` from the
    origin satisfies ``cosh d = cosh t + e^t |x|^2 / 2``.
    """
    xvec = np.atleast_1d(np.asarray(xvec, dtype=float))
    y = math.exp(t)
    return convert(HyperbolicPoint.halfspace(y, y * xvec), "polar")


# ---------------------------------------------------------------------------
# Rotations
# ---------------------------------------------------------------------------

def rotation_to_axis(omega):
    """A rotation ``k`` in ``SO(p)`` with ``k e_p = omega``."""
    omega = np.asarray(omega, dtype=float)
    omega = omega / np.linalg.norm(omega)
    p = omega.size
    e = north_pole(p)
    v = e - omega
    nv = v @ v
    if nv < 1e-30:
        return np.eye(p)
    house = np.eye(p) - 2.0 * np.outer(v, v) / nv  # swaps e_p and omega
    flip = np.eye(p)
    flip[0, 0] = -1.0 if p > 1 else 1.0
    if p == 1:
        return house
    return house @ flip


def random_rotation(p, rng):
    """Haar-random element of ``SO(p)``."""
    q, r = np.linalg.qr(rng.standard_normal((p, p)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def rotate(k, x):
    """Apply a rotation (orthogonal matrix) to a point or boundary point."""
    if isinstance(x, BoundaryPoint):
        return BoundaryPoint(k @ x.vec)
    if x.model == "polar":
        t, omega = x.coords
        return HyperbolicPoint.polar(t, k @ omega)
    return HyperbolicPoint.ball(k @ x.ball_vector())


# ---------------------------------------------------------------------------
# Quadrature on the boundary sphere
# ---------------------------------------------------------------------------

def _polar_constant(p):
    # normalizes sin^{p-2}(theta) d theta to a probability measure on [0, pi]
    return math.gamma(0.5 * p) / (math.sqrt(math.pi) * math.gamma(0.5 * (p - 1)))


def _azimuth(p, n_azimuth):
    """Unit vectors and weights for the directions orthogonal to ``e_p``."""
    if p == 2:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if p == 3:
        phi = 2.0 * np.pi * np.arange(n_azimuth) / n_azimuth
        return np.stack([np.cos(phi), np.sin(phi)], axis=1), np.full(n_azimuth, 1.0 / n_azimuth)
    raise NotImplementedError("azimuthal quadrature is implemented for p in {2, 3}")


def sphere_rule(p, n_polar=64, n_azimuth=None):
    """Product rule on ``S^{p-1}`` for the normalized (probability) measure.

    Returns ``(points, weights)`` with ``points`` of shape ``(N, p)``.
    Gauss-Legendre in ``cos(theta)`` for ``p = 3``; for ``p = 2`` the
    circle gets a plain trapezoid rule with ``2 * n_polar`` points.
    """
    if p == 2:
        m = 2 * n_polar
        phi = 2.0 * np.pi * np.arange(m) / m
        return np.stack([np.sin(phi), np.cos(phi)], axis=1), np.full(m, 1.0 / m)
    if p == 3:
        n_azimuth = n_azimuth or 2 * n_polar
        rule = gauss_legendre(n_polar, -1.0, 1.0)
        c = rule.nodes
        s = np.sqrt(1.0 - c * c)
        dirs, wa = _azimuth(3, n_azimuth)
        pts = np.concatenate(
            [s[:, None, None] * dirs[None, :, :], np.broadcast_to(c[:, None, None], (c.size, dirs.shape[0], 1))],
            axis=2,
        ).reshape(-1, 3)
        w = (0.5 * rule.weights[:, None] * wa[None, :]).ravel()
        return pts, w
    raise NotImplementedError("full sphere quadrature is implemented for p in {2, 3}")


def alpha_nodes(t, nu_abs=0.0, degree=0):
    """Node count for :func:`poisson_axis_rule` resolving ``|nu|`` at radius `t`."""
    return int(math.ceil(abs(nu_abs) * t + 2.0 * t + 6 * degree + 40))


def poisson_axis_rule(t, mp: ModelParams, n_alpha=None):
    """Boundary rule adapted to the Poisson kernel of ``a_t . o``.

    The polar angle ``theta`` (measured from ``e_p``) is reparametrized by
    ``A(a_t . o, b) = t cos(alpha)``, ``alpha`` in ``[0, pi]``.  The kernel
    ``exp((nu + rho) A)`` becomes an entire function of ``alpha`` and
    Gauss-Legendre in ``alpha`` converges geometrically however peaked
    the kernel is.

    Returns
    -------
    cos_theta, bracket, weights : ndarray
        For a zonal ``g``,
        ``sum(weights * g(cos_theta) * exp((nu + rho) * bracket))``
        approximates ``int_B g(b) exp((nu + rho) A(a_t . o, b)) db``
        with ``db`` the probability measure.
    """
    n = mp.n
    if n_alpha is None:
        n_alpha = alpha_nodes(t)
    return _axis_rule_cached(float(t), n, int(n_alpha))


@lru_cache(maxsize=4096)
def _axis_rule_cached(t, n, n_alpha):
    rule = gauss_legendre(n_alpha, 0.0, math.pi)
    alpha = rule.nodes
    ca = np.cos(alpha)
    sa = np.sin(alpha)
    const = _polar_constant(n + 1)
    if t == 0.0:
        cth = ca.copy()
        bracket = np.zeros_like(ca)
        w = const * sa ** (n - 1) * rule.weights
    else:
        u = -t * ca
        x1 = t * (1.0 - ca)
        x2 = t * (1.0 + ca)
        e1 = np.ones_like(x1)
        e2 = np.ones_like(x2)
        nz1 = x1 > 0
        nz2 = x2 > 0
        e1[nz1] = np.expm1(x1[nz1]) / x1[nz1]
        e2[nz2] = -np.expm1(-x2[nz2]) / x2[nz2]
        sh = math.sinh(t)
        cth = np.clip((2.0 * math.sinh(0.5 * t) ** 2 - np.expm1(u)) / sh, -1.0, 1.0)
        bracket = -u
        if n == 1:
            shape = (e1 * e2) ** -0.5
        else:
            shape = (t * sa / sh) ** (n - 1) * (e1 * e2) ** (0.5 * (n - 2))
        w = const * shape * np.exp(u) * rule.weights
    for arr in (cth, bracket, w):
        arr.setflags(write=False)
    return cth, bracket, w


def axis_product_rule(t, mp: ModelParams, n_alpha=None, n_azimuth=64):
    """Full boundary rule around the axis point ``a_t . o``.

    Returns ``(points, bracket, weights)`` where ``points`` are unit vectors
    in ``R^p``.  For ``p = 2`` the two azimuthal directions are ``+-1``.
    """
    cth, bracket, w = poisson_axis_rule(t, mp, n_alpha)
    sth = np.sqrt(np.clip(1.0 - cth * cth, 0.0, None))
    dirs, wa = _azimuth(mp.p, n_azimuth)
    pts = np.concatenate(
        [sth[:, None, None] * dirs[None, :, :],
         np.broadcast_to(cth[:, None, None], (cth.size, dirs.shape[0], 1))],
        axis=2,
    ).reshape(-1, mp.p)
    return pts, np.repeat(bracket, wa.size), (w[:, None] * wa[None, :]).ravel()


__all__.append("axis_product_rule")
