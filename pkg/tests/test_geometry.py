import math

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hyperharm.geometry import (
    BoundaryDegeneracyError,
    BoundaryPoint,
    HyperbolicPoint,
    ModelParams,
    convert,
    horocycle_bracket,
    horocyclic_compose,
    north_pole,
    polar_distance,
    random_rotation,
    rotate,
    rotation_to_axis,
    sphere_area,
    sphere_rule,
    volume_weight,
)

directions = st.lists(st.floats(-1, 1), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3)


def _hyperboloid(z):
    """Ball point to the hyperboloid model, an independent distance oracle."""
    r2 = float(z @ z)
    return np.concatenate([[(1 + r2) / (1 - r2)], 2 * z / (1 - r2)])


def _hyperboloid_distance(z1, z2):
    a, b = _hyperboloid(z1), _hyperboloid(z2)
    return math.acosh(max(1.0, a[0] * b[0] - a[1:] @ b[1:]))


def test_model_params():
    mp = ModelParams(3)
    assert (mp.n, mp.rho) == (2, 1.0)
    with pytest.raises(ValueError):
        ModelParams(1)


def test_bracket_at_origin_is_zero():
    o = HyperbolicPoint.polar(0.0, north_pole(3))
    assert horocycle_bracket(o, BoundaryPoint([0.3, -0.2, 0.9])) == 0.0


@given(st.floats(0.0, 15.0), directions)
def test_bracket_forward_endpoint_is_t(t, omega):
    omega = np.asarray(omega) / np.linalg.norm(omega)
    x = HyperbolicPoint.polar(t, omega)
    assert horocycle_bracket(x, BoundaryPoint(omega)) == pytest.approx(t, abs=1e-12 * max(1, t))


@given(st.floats(0.0, 6.0), directions, directions)
def test_bracket_polar_matches_ball_formula(t, omega, b):
    x = HyperbolicPoint.polar(t, omega)
    bp = BoundaryPoint(b)
    z = x.ball_vector()
    ref = math.log((1 - z @ z) / ((z - bp.vec) @ (z - bp.vec)))
    assert horocycle_bracket(x, bp) == pytest.approx(ref, abs=1e-10)
    assert abs(horocycle_bracket(x, bp)) <= t + 1e-12


def test_bracket_rotation_equivariance(rng):
    for _ in range(20):
        k = random_rotation(3, rng)
        x = HyperbolicPoint.polar(rng.uniform(0, 4), rng.normal(size=3))
        b = BoundaryPoint(rng.normal(size=3))
        assert horocycle_bracket(rotate(k, x), rotate(k, b)) == pytest.approx(horocycle_bracket(x, b), abs=1e-12)


def test_bracket_halfspace_is_log_height():
    x = HyperbolicPoint.halfspace(2.5, [0.3, -0.7])
    assert horocycle_bracket(x, BoundaryPoint(north_pole(3))) == pytest.approx(math.log(2.5), abs=1e-12)


def test_polar_distance_models():
    assert polar_distance(HyperbolicPoint.polar(0.0, north_pole(2))) == 0.0
    t = 1.3
    ball = HyperbolicPoint.ball([0.0, 0.0, math.tanh(t / 2)])
    assert polar_distance(ball) == pytest.approx(t, abs=1e-12)
    assert _hyperboloid_distance(np.zeros(3), ball.ball_vector()) == pytest.approx(t, abs=1e-12)
    assert polar_distance(HyperbolicPoint.halfspace(math.exp(-t), [0.0, 0.0])) == pytest.approx(t, abs=1e-12)


@given(st.floats(0.0, 8.0), directions)
def test_model_round_trips(t, omega):
    x = HyperbolicPoint.polar(t, omega)
    back = convert(convert(convert(x, "halfspace"), "ball"), "polar")
    assert back.coords[0] == pytest.approx(t, abs=1e-10)
    if t > 1e-6:
        np.testing.assert_allclose(back.coords[1], x.coords[1], atol=1e-9)
    for model in ("ball", "halfspace", "polar"):
        assert polar_distance(convert(x, model)) == pytest.approx(t, abs=1e-10)


def test_origin_in_every_model():
    o = convert(HyperbolicPoint.halfspace(1.0, [0.0, 0.0]), "polar")
    assert o.coords[0] == pytest.approx(0.0, abs=1e-15)


def test_degenerate_points_rejected():
    with pytest.raises(BoundaryDegeneracyError):
        HyperbolicPoint.ball([1.0, 0.0])
    with pytest.raises(BoundaryDegeneracyError):
        HyperbolicPoint.halfspace(0.0, [0.0])


def test_volume_weight():
    mp = ModelParams(3)
    assert volume_weight(0.0, mp) == 0.0
    assert volume_weight(1.0, mp) == pytest.approx(float(mpmath.sinh(1) ** 2), rel=1e-15)
    assert volume_weight(1.0, mp) == pytest.approx(1.38109, abs=1e-5)
    t = np.linspace(0, 20, 401)
    for p in (2, 3, 4, 5):
        mp = ModelParams(p)
        assert np.all(volume_weight(t, mp) <= np.exp(2 * mp.rho * t))


def test_horocyclic_compose():
    mp = ModelParams(3)
    x = horocyclic_compose(0.7, [0.0, 0.0], mp)
    assert x.coords[0] == pytest.approx(0.7, abs=1e-12)
    small = horocyclic_compose(0.0, [1e-4, 0.0], mp)
    assert small.coords[0] == pytest.approx(1e-4, rel=1e-6)
    d = horocyclic_compose(1.0, [1.0, 0.0], mp).coords[0]
    # the half-space distance formula gives cosh d = cosh t + e^t |x|^2 / 2 with x the horocycle coordinate
    assert math.cosh(d) == pytest.approx(math.cosh(1.0) + math.e / 2, rel=1e-12)
    assert d == pytest.approx(1.7275, abs=1e-4)


def test_rotations():
    rng = np.random.default_rng(7)
    for p in (2, 3, 4):
        k = random_rotation(p, rng)
        np.testing.assert_allclose(k @ k.T, np.eye(p), atol=1e-12)
        assert np.linalg.det(k) == pytest.approx(1.0)
        omega = rng.normal(size=p)
        omega /= np.linalg.norm(omega)
        r = rotation_to_axis(omega)
        np.testing.assert_allclose(r @ north_pole(p), omega, atol=1e-12)
        assert np.linalg.det(r) == pytest.approx(1.0)


@pytest.mark.parametrize("p", [2, 3])
def test_sphere_rule_probability_measure(p):
    pts, w = sphere_rule(p, 16)
    assert w.sum() == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(np.linalg.norm(pts, axis=1), 1.0, atol=1e-14)
    # second moment of one coordinate is 1/p
    assert (w * pts[:, 0] ** 2).sum() == pytest.approx(1.0 / p, abs=1e-14)


def test_sphere_area():
    assert sphere_area(2) == pytest.approx(2 * math.pi)
    assert sphere_area(3) == pytest.approx(4 * math.pi)
