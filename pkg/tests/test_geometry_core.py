"""几何基础类型测试"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from geometry.core import (
    Circle3D,
    Intrinsics,
    RigidTransform,
    backproject_ray,
    canonical_normal,
    circle_basis,
    project,
    project_points,
    rotation_error,
    translation_error,
)
from utils.errors import InputError, ProjectionError

K = Intrinsics(600.0, 600.0, 640.0, 480.0)


def test_intrinsics_rejects_non_positive_focal():
    with pytest.raises(InputError):
        Intrinsics(0.0, 600.0, 640.0, 480.0)


def test_intrinsics_round_trip_dict():
    assert Intrinsics(**K.to_dict()) == K
    assert_allclose(K.K @ K.K_inv, np.eye(3), atol=1e-15)


def test_rigid_transform_rejects_non_rotation():
    with pytest.raises(InputError):
        RigidTransform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
    with pytest.raises(InputError):
        RigidTransform(np.eye(3) * 1.01, np.zeros(3))


def test_rigid_transform_inverse_and_compose():
    pose = RigidTransform.from_rotvec([0.3, -0.2, 0.5], [1.0, 2.0, -0.5])
    ident = pose @ pose.inverse()
    assert_allclose(ident.rotation, np.eye(3), atol=1e-12)
    assert_allclose(ident.translation, np.zeros(3), atol=1e-12)

    p = np.array([0.4, -1.0, 2.0])
    assert_allclose(pose.inverse().apply(pose.apply(p)), p, atol=1e-12)


def test_rigid_transform_from_matrix_checks_last_row():
    m = np.eye(4)
    m[3, 0] = 0.1
    with pytest.raises(InputError):
        RigidTransform.from_matrix(m)
    pose = RigidTransform.from_rotvec([0.1, 0.2, 0.3], [1.0, 0.0, 0.0])
    back = RigidTransform.from_matrix(pose.as_matrix())
    assert_allclose(back.rotation, pose.rotation)


def test_project_principal_point_and_behind_camera():
    ident = RigidTransform.identity()
    assert_allclose(project([0.0, 0.0, 5.0], ident, K), [640.0, 480.0])
    assert_allclose(project([1.0, 0.5, 2.0], ident, K), [940.0, 630.0])
    with pytest.raises(ProjectionError):
        project_points(np.array([[0.0, 0.0, -1.0]]), ident, K)


def test_backproject_ray_is_unit_and_consistent():
    ray = backproject_ray([940.0, 630.0], K)
    assert_allclose(np.linalg.norm(ray), 1.0)
    assert_allclose(ray / ray[2], [0.5, 0.25, 1.0])


def test_circle_basis_right_handed():
    for n in ([0, 0, 1], [1, 2, 3], [0, -1, 0]):
        n = np.asarray(n, dtype=float) / np.linalg.norm(n)
        u, v = circle_basis(n)
        assert_allclose(np.cross(u, v), n, atol=1e-12)
        assert abs(u @ n) < 1e-12 and abs(v @ n) < 1e-12


def test_circle_points_lie_on_circle():
    circle = Circle3D([1.0, 2.0, 3.0], [0.0, 1.0, 1.0], 2.0)
    pts = circle.points_at(np.linspace(0, 2 * np.pi, 10))
    d = pts - circle.center
    assert_allclose(np.linalg.norm(d, axis=1), 2.0)
    assert_allclose(d @ circle.normal, 0.0, atol=1e-12)


def test_circle_rejects_bad_radius_and_normal():
    with pytest.raises(InputError):
        Circle3D([0, 0, 0], [0, 0, 1], -1.0)
    with pytest.raises(InputError):
        Circle3D([0, 0, 0], [0, 0, 0], 1.0)


def test_canonical_normal_sign():
    assert_allclose(canonical_normal(np.array([0.0, 0.0, -2.0])), [0, 0, 1])
    assert_allclose(canonical_normal(np.array([1.0, -1.0, 0.0])), np.array([-1.0, 1.0, 0.0]) / np.sqrt(2))


def test_pose_errors():
    pose = RigidTransform.from_rotvec([0.0, 0.0, 0.1], [1.0, 0.0, 0.0])
    assert rotation_error(pose.rotation, np.eye(3)) == pytest.approx(0.1)
    assert translation_error(pose.translation, np.zeros(3)) == pytest.approx(1.0)
