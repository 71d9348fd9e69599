"""PnP 测试"""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from config.estimation import get_ransac_config
from estimation.pnp import (
    AmbiguousCorrespondence,
    Correspondence,
    _perturb,
    point_errors,
    refine_pose,
    reprojection_jacobian,
    reprojection_residuals,
    solve_pnp,
    solve_pnp_paired,
    solve_pnp_ransac,
)
from geometry.core import Intrinsics, RigidTransform, project_points, rotation_error, translation_error
from utils.errors import InputError, InsufficientPointsError

K = Intrinsics(600.0, 600.0, 640.0, 480.0)
POSE = RigidTransform.from_rotvec([0.1, -0.2, 0.05], [0.3, -0.1, 0.5])


def _scene(n=30, seed=0, planar=False):
    rng = np.random.default_rng(seed)
    cam = np.column_stack([
        rng.uniform(-1.0, 1.0, n),
        rng.uniform(-1.0, 1.0, n),
        np.full(n, 4.0) if planar else rng.uniform(3.0, 6.0, n),
    ])
    lidar = POSE.inverse().apply(cam)
    return lidar, project_points(lidar, POSE, K)


def _assert_pose(pose, atol_rot=1e-8, atol_trans=1e-8):
    assert rotation_error(pose.rotation, POSE.rotation) < atol_rot
    assert translation_error(pose.translation, POSE.translation) < atol_trans


def test_correspondence_validation():
    with pytest.raises(InputError):
        Correspondence([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(InputError):
        Correspondence([0.0, 0.0, 1.0], [np.nan, 2.0])
    with pytest.raises(InputError):
        AmbiguousCorrespondence([0.0, 0.0, 1.0], np.zeros((3, 2)))


def test_jacobian_matches_finite_differences():
    points, pixels = _scene(8)
    jac = reprojection_jacobian(POSE, points, K)
    eps = 1e-6
    for i in range(6):
        delta = np.zeros(6)
        delta[i] = eps
        plus = reprojection_residuals(_perturb(POSE, delta), points, pixels, K)
        minus = reprojection_residuals(_perturb(POSE, -delta), points, pixels, K)
        numeric = (plus - minus) / (2 * eps)
        assert_allclose(jac[:, i], numeric, rtol=1e-4, atol=1e-3)


@pytest.mark.parametrize("n", [4, 5, 12])
def test_solve_pnp_exact_non_planar(n):
    points, pixels = _scene(n, seed=n)
    estimate = solve_pnp([Correspondence(p, q) for p, q in zip(points, pixels)], K)
    _assert_pose(estimate.transform, 1e-6, 1e-6)
    assert estimate.mean_reproj_error < 1e-6


def test_solve_pnp_exact_planar():
    points, pixels = _scene(8, seed=2, planar=True)
    estimate = solve_pnp([Correspondence(p, q) for p, q in zip(points, pixels)], K)
    _assert_pose(estimate.transform, 1e-6, 1e-6)


def test_solve_pnp_needs_four_points():
    points, pixels = _scene(3)
    with pytest.raises(InsufficientPointsError):
        solve_pnp([Correspondence(p, q) for p, q in zip(points, pixels)], K)


def test_refinement_cost_is_monotone():
    points, pixels = _scene(20, seed=3)
    rng = np.random.default_rng(3)
    noisy = pixels + rng.normal(0, 1.0, pixels.shape)
    start = _perturb(POSE, np.array([0.02, -0.01, 0.015, 0.05, -0.03, 0.04]))
    pose, costs = refine_pose(start, points, noisy, K)
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert costs[-1] < costs[0]
    assert rotation_error(pose.rotation, POSE.rotation) < 5e-3


def test_point_errors_behind_camera_is_inf():
    points = np.array([[0.0, 0.0, -1.0]])
    assert np.isinf(point_errors(RigidTransform.identity(), points, np.zeros((1, 2)), K)[0])


def test_ransac_rejects_outliers():
    points, pixels = _scene(30, seed=4)
    rng = np.random.default_rng(4)
    outlier = np.zeros(len(points), dtype=bool)
    outlier[rng.choice(len(points), 6, replace=False)] = True
    corrupted = pixels.copy()
    corrupted[outlier] += rng.uniform(40.0, 80.0, (outlier.sum(), 2)) * rng.choice([-1, 1], (outlier.sum(), 2))

    cfg = get_ransac_config("pnp", max_iterations=200, seed=1)
    estimate = solve_pnp_ransac([Correspondence(p, q) for p, q in zip(points, corrupted)], K, cfg)
    _assert_pose(estimate.transform, 1e-6, 1e-6)
    assert np.array_equal(estimate.inlier_mask, ~outlier)
    assert estimate.selection is None


def test_paired_ransac_picks_true_hypotheses():
    points, pixels = _scene(30, seed=5)
    rng = np.random.default_rng(5)
    angles = rng.uniform(0, 2 * np.pi, len(points))
    wrong = pixels + 15.0 * np.column_stack([np.cos(angles), np.sin(angles)])
    true_index = rng.integers(0, 2, len(points))
    hyps = np.where(true_index[:, None, None] == 0,
                    np.stack([pixels, wrong], axis=1),
                    np.stack([wrong, pixels], axis=1))

    ambiguous = [AmbiguousCorrespondence(p, h) for p, h in zip(points, hyps)]
    cfg = get_ransac_config("pnp", max_iterations=500, seed=2)
    estimate = solve_pnp_paired(ambiguous, K, cfg)
    _assert_pose(estimate.transform, 1e-6, 1e-6)
    assert np.array_equal(estimate.selection, true_index)
    assert estimate.inlier_mask.all()


def test_paired_with_degenerate_pairs_matches_standard():
    points, pixels = _scene(12, seed=6)
    cfg = get_ransac_config("pnp", max_iterations=50, seed=0)
    paired = solve_pnp_paired([AmbiguousCorrespondence.degenerate(p, q) for p, q in zip(points, pixels)], K, cfg)
    standard = solve_pnp_ransac([Correspondence(p, q) for p, q in zip(points, pixels)], K, cfg)
    assert_allclose(paired.transform.as_matrix(), standard.transform.as_matrix(), atol=1e-12)
