"""二次曲线工具测试"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry.core import Circle3D, Intrinsics, RigidTransform, project_points
from geometry.ellipse import (
    Conic,
    EllipseParams,
    axis_ratio,
    center_of_mass,
    conic_to_params,
    fit_conic,
    line_conic_intersect,
    params_to_conic,
    project_circle_to_conic,
    transform_conic,
)
from utils.errors import (
    EmptyRegionError,
    InputError,
    InsufficientPointsError,
    InvalidCandidateError,
    NotAnEllipseError,
    ProjectionError,
)

K = Intrinsics(600.0, 600.0, 640.0, 480.0)
PARAMS = EllipseParams(640.0, 480.0, 50.0, 30.0, 0.6)


def _ellipse_points(params: EllipseParams, n=40):
    t = np.linspace(0, 2 * np.pi, n, endpoint=False)
    c, s = math.cos(params.theta), math.sin(params.theta)
    x = params.a * np.cos(t)
    y = params.b * np.sin(t)
    return np.column_stack([params.cx + c * x - s * y, params.cy + s * x + c * y])


def test_params_round_trip():
    back = conic_to_params(params_to_conic(PARAMS))
    assert_allclose([back.cx, back.cy, back.a, back.b, back.theta],
                    [640.0, 480.0, 50.0, 30.0, 0.6], atol=1e-8)


def test_conic_normalisation_and_sign():
    q = params_to_conic(PARAMS).q
    flipped = Conic(-5.0 * q)
    assert_allclose(flipped.q, q, atol=1e-15)
    assert np.linalg.norm(flipped.q) == pytest.approx(1.0)
    assert flipped.contains(np.array([640.0, 480.0]))
    with pytest.raises(NotAnEllipseError):
        Conic(np.zeros((3, 3)))


def test_ellipse_params_validation():
    with pytest.raises(InputError):
        EllipseParams(0.0, 0.0, 10.0, 20.0)


def test_fit_conic_exact_points():
    fitted = conic_to_params(fit_conic(_ellipse_points(PARAMS)))
    assert_allclose([fitted.cx, fitted.cy, fitted.a, fitted.b, fitted.theta],
                    [640.0, 480.0, 50.0, 30.0, 0.6], atol=1e-6)


def test_fit_conic_failures():
    with pytest.raises(InsufficientPointsError):
        fit_conic(_ellipse_points(PARAMS)[:4])
    line = np.column_stack([np.arange(10.0), 2.0 * np.arange(10.0) + 1.0])
    with pytest.raises(NotAnEllipseError):
        fit_conic(line)
    t = np.linspace(-1.5, 1.5, 20)
    hyperbola = np.vstack([np.column_stack([np.cosh(t), np.sinh(t)]),
                           np.column_stack([-np.cosh(t), np.sinh(t)])])
    with pytest.raises(NotAnEllipseError):
        fit_conic(hyperbola)


def test_center_of_mass_symmetric_circle():
    conic = params_to_conic(EllipseParams(100.5, 50.5, 20.0, 20.0))
    assert_allclose(center_of_mass(conic), [100.5, 50.5], atol=1e-9)


def test_center_of_mass_empty_region():
    conic = params_to_conic(EllipseParams(10.5, 10.5, 0.3, 0.3))
    with pytest.raises(EmptyRegionError):
        center_of_mass(conic)


def test_line_intersection():
    conic = params_to_conic(EllipseParams(10.0, 10.0, 5.0, 5.0))
    a, b = line_conic_intersect(conic, [10.0, 10.0], 0.0)
    assert_allclose(a, [5.0, 10.0], atol=1e-9)
    assert_allclose(b, [15.0, 10.0], atol=1e-9)
    with pytest.raises(InvalidCandidateError):
        line_conic_intersect(conic, [30.0, 10.0], 0.0)


def test_line_intersection_reversed_direction_swaps_endpoints():
    conic = params_to_conic(PARAMS)
    through = np.array([655.0, 470.0])
    for gamma in (0.0, 0.4, 1.3, 2.9):
        a, b = line_conic_intersect(conic, through, gamma)
        a_rev, b_rev = line_conic_intersect(conic, through, gamma + math.pi)
        assert_allclose(a_rev, b, atol=1e-8)
        assert_allclose(b_rev, a, atol=1e-8)
        # 弦长与方向无关，through 在弦上
        assert np.linalg.norm(a - through) + np.linalg.norm(b - through) == pytest.approx(
            np.linalg.norm(a - b), rel=1e-12)

def test_fronto_parallel_projection_is_circle():
    circle = Circle3D([0.0, 0.0, 3.0], [0.0, 0.0, 1.0], 0.5)
    conic = project_circle_to_conic(circle, RigidTransform.identity(), K)
    params = conic_to_params(conic)
    assert_allclose([params.cx, params.cy, params.a, params.b], [640.0, 480.0, 100.0, 100.0], atol=1e-8)
    assert axis_ratio(conic) == pytest.approx(1.0)


def test_oblique_projection_contains_projected_boundary():
    circle = Circle3D([0.3, -0.2, 4.0], [0.5, 0.1, -0.8], 0.6)
    pose = RigidTransform.identity()
    conic = project_circle_to_conic(circle, pose, K)
    pixels = project_points(circle.points_at(np.linspace(0, 2 * np.pi, 30)), pose, K)
    scale = np.abs(conic.evaluate(conic.center))
    assert np.abs(conic.evaluate(pixels)).max() < 1e-9 * scale
    assert axis_ratio(conic) > 1.1


def test_projection_behind_camera():
    circle = Circle3D([0.0, 0.0, 0.2], [1.0, 0.0, 0.0], 0.5)
    with pytest.raises(ProjectionError):
        project_circle_to_conic(circle, RigidTransform.identity(), K)


def test_transform_conic_translation():
    h = np.array([[1.0, 0.0, 5.0], [0.0, 1.0, -3.0], [0.0, 0.0, 1.0]])
    moved = conic_to_params(transform_conic(params_to_conic(PARAMS), h))
    assert_allclose([moved.cx, moved.cy, moved.a, moved.b], [645.0, 477.0, 50.0, 30.0], atol=1e-8)
