import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from prostate_volume.ellipse import (
    AxisPolicy,
    EllipseParams,
    fit_conic,
    fit_ellipse,
    image_axis_diameters,
    policy_diameters,
    sample_ellipse,
)
from prostate_volume.errors import FitError


def angle_diff(a, b):
    """Smallest difference between two axis angles (mod pi)."""
    d = (a - b) % math.pi
    return min(d, math.pi - d)


ellipses = st.tuples(
    st.floats(-50, 50),  # cx
    st.floats(-50, 50),  # cy
    st.floats(2.0, 40.0),  # a
    st.floats(1.1, 4.0),  # a / b
    st.floats(0.0, math.pi - 1e-6),  # theta
)


class TestFit:
    def test_circle(self):
        e = fit_ellipse(sample_ellipse(0, 0, 1, 1, 0))
        assert e.semi_major_mm == pytest.approx(1.0, rel=1e-9)
        assert e.semi_minor_mm == pytest.approx(1.0, rel=1e-9)
        assert e.orientation_rad == 0.0
        assert abs(e.cx_mm) < 1e-12 and abs(e.cy_mm) < 1e-12

    def test_rotated_ellipse(self):
        theta = math.radians(30)
        e = fit_ellipse(sample_ellipse(3, 2, 2.5, 1.0, theta))
        for got, want in [(e.cx_mm, 3), (e.cy_mm, 2), (e.semi_major_mm, 2.5), (e.semi_minor_mm, 1.0),
                          (e.orientation_rad, theta)]:
            assert abs(got - want) / abs(want) < 1e-6

    def test_collinear(self):
        with pytest.raises(FitError):
            fit_ellipse([(i, 2 * i + 1) for i in range(5)])

    def test_too_few(self):
        with pytest.raises(FitError, match="insufficient"):
            fit_ellipse(sample_ellipse(0, 0, 2, 1, 0, n=4))

    def test_coincident(self):
        with pytest.raises(FitError):
            fit_ellipse([(1.0, 1.0)] * 6)

    def test_hyperbola_points_still_give_ellipse_or_fail(self):
        t = np.linspace(-2, 2, 40)
        pts = np.column_stack((np.cosh(t), np.sinh(t)))
        try:
            e = fit_ellipse(pts)
        except FitError:
            return
        assert e.semi_major_mm >= e.semi_minor_mm > 0

    def test_params_validate(self):
        with pytest.raises(ValueError):
            EllipseParams(0, 0, 1, 2, 0)
        with pytest.raises(ValueError):
            EllipseParams(0, 0, 2, 1, math.pi)


@settings(max_examples=100, deadline=None)
@given(ellipses)
def test_residual_on_exact_samples(p):
    cx, cy, a, r, th = p
    conic = fit_conic(sample_ellipse(cx, cy, a, a / r, th))
    assert np.abs(conic.residuals(sample_ellipse(cx, cy, a, a / r, th))).max() < 1e-9


@settings(max_examples=100, deadline=None)
@given(ellipses, st.floats(-200, 200), st.floats(-200, 200))
def test_translation_invariance(p, tx, ty):
    cx, cy, a, r, th = p
    pts = sample_ellipse(cx, cy, a, a / r, th)
    e0 = fit_ellipse(pts)
    e1 = fit_ellipse(pts + [tx, ty])
    scale = a + abs(cx) + abs(cy) + abs(tx) + abs(ty)
    assert abs(e1.cx_mm - (e0.cx_mm + tx)) <= 1e-9 * scale
    assert abs(e1.cy_mm - (e0.cy_mm + ty)) <= 1e-9 * scale
    assert e1.semi_major_mm == pytest.approx(e0.semi_major_mm, rel=1e-9)
    assert e1.semi_minor_mm == pytest.approx(e0.semi_minor_mm, rel=1e-9)
    assert angle_diff(e1.orientation_rad, e0.orientation_rad) < 1e-9


@settings(max_examples=100, deadline=None)
@given(ellipses, st.floats(0, 2 * math.pi))
def test_rotation_equivariance(p, phi):
    cx, cy, a, r, th = p
    pts = sample_ellipse(cx, cy, a, a / r, th)
    c, s = math.cos(phi), math.sin(phi)
    rot = pts @ np.array([[c, s], [-s, c]])
    e0, e1 = fit_ellipse(pts), fit_ellipse(rot)
    assert e1.semi_major_mm == pytest.approx(e0.semi_major_mm, rel=1e-8)
    assert e1.semi_minor_mm == pytest.approx(e0.semi_minor_mm, rel=1e-8)
    assert angle_diff(e1.orientation_rad, (e0.orientation_rad + phi) % math.pi) < 1e-8


def test_noise_robustness():
    """Uniform +/-0.5 mm jitter moves diameters by < 2% on prostate-sized outlines."""
    worst = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        a, b = rng.uniform(15, 35), rng.uniform(12, 30)
        a, b = max(a, b), min(a, b)
        th = rng.uniform(0, math.pi)
        pts = sample_ellipse(rng.uniform(-20, 20), rng.uniform(-20, 20), a, b, th, n=300)
        pts = pts + rng.uniform(-0.5, 0.5, pts.shape)
        e = fit_ellipse(pts)
        worst = max(worst, abs(e.semi_major_mm - a) / a, abs(e.semi_minor_mm - b) / b)
    assert worst < 0.02


class TestImageAxes:
    def test_horizontal_major(self):
        assert image_axis_diameters(EllipseParams(0, 0, 25, 20, 0.0)) == (50, 40)

    def test_vertical_major(self):
        assert image_axis_diameters(EllipseParams(0, 0, 25, 20, math.pi / 2)) == (40, 50)

    def test_quarter_turn_boundary(self):
        assert image_axis_diameters(EllipseParams(0, 0, 25, 20, math.pi / 4)) == (40, 50)

    def test_three_quarter_boundary(self):
        assert image_axis_diameters(EllipseParams(0, 0, 25, 20, 3 * math.pi / 4)) == (50, 40)

    @pytest.mark.parametrize(
        "policy, theta, expected",
        [
            ("orientation-quadrant", 0.1, (50, 40)),
            ("horizontal", 1.5, (40, 50)),
            ("vertical", 0.1, (40, 50)),
            ("major", 1.5, (50, 40)),
            ("minor", 0.1, (40, 50)),
        ],
    )
    def test_policies(self, policy, theta, expected):
        assert policy_diameters(EllipseParams(0, 0, 25, 20, theta), policy) == expected

    def test_unknown_policy(self):
        with pytest.raises(ValueError):
            policy_diameters(EllipseParams(0, 0, 25, 20, 0), "diagonal")

    def test_policy_enum_values(self):
        assert {p.value for p in AxisPolicy} == {
            "orientation-quadrant", "horizontal", "vertical", "major", "minor"
        }
