"""投影圆心修正与半径比消歧测试"""
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from estimation.center_refine import (
    CenterHypothesisPair,
    SearchConfig,
    build_rectifying_homography,
    chord_distance,
    chord_loss,
    compute_loss_field,
    disambiguate_by_ratio,
    find_center_hypotheses,
    hypothesis_ratios,
    rectified_radius_ratio,
    select_by_loss_rank,
)
from geometry.core import Circle3D, Intrinsics, RigidTransform, project
from geometry.ellipse import axis_ratio, conic_to_params, project_circle_to_conic
from scripts.make_fixtures import oblique_pair
from utils.errors import DisambiguationError, InputError, InvalidCandidateError

K = Intrinsics(600.0, 600.0, 640.0, 480.0)
IDENTITY = RigidTransform.identity()
FRONTO = Circle3D([0.0, 0.0, 3.0], [0.0, 0.0, 1.0], 0.5)
FIRST, SECOND = oblique_pair()


def _conic(circle):
    return project_circle_to_conic(circle, IDENTITY, K)


def _gt(circle):
    return project(circle.center, IDENTITY, K)


def test_chord_distance_fronto_equals_depth():
    conic = _conic(FRONTO)
    for gamma in (0.0, 0.7, 2.0):
        assert chord_distance(conic, [640.0, 480.0], gamma, 0.5, K) == pytest.approx(3.0, rel=1e-9)


def test_chord_distance_rejects_outside_candidate():
    with pytest.raises(InvalidCandidateError):
        chord_distance(_conic(FRONTO), [0.0, 0.0], 0.0, 0.5, K)
    with pytest.raises(InputError):
        chord_distance(_conic(FRONTO), [640.0, 480.0], 0.0, -1.0, K)


def test_loss_vanishes_at_true_projected_center():
    conic = _conic(FIRST)
    gt = _gt(FIRST)
    loss_true = chord_loss(conic, gt, FIRST.radius, K)
    loss_ellipse = chord_loss(conic, conic_to_params(conic).center, FIRST.radius, K)
    assert loss_true < 1e-12
    assert loss_ellipse > 1e3 * max(loss_true, 1e-18)
    # 归一化损失同样为零
    assert chord_loss(conic, gt, None, K) < 1e-12


def test_loss_field_export():
    field = compute_loss_field(_conic(FRONTO), 0.5, K, SearchConfig(n_dirs=12))
    frame = field.to_frame()
    assert list(frame.columns) == ["u", "v", "loss"]
    assert len(frame) > 0
    assert np.isfinite(frame["loss"]).all()


def test_fronto_gives_single_hypothesis():
    conic = _conic(FRONTO)
    pair = find_center_hypotheses(conic, 0.5, K)
    assert pair.single
    assert len(pair.hypotheses) == 1
    assert np.linalg.norm(pair.c_a - [640.0, 480.0]) <= 1.0
    assert pair.distance_a == pytest.approx(3.0, rel=1e-3)


def test_oblique_gives_two_hypotheses_one_at_truth():
    conic = _conic(FIRST)
    gt = _gt(FIRST)
    pair = find_center_hypotheses(conic, FIRST.radius, K)
    assert not pair.single
    assert pair.loss_a <= pair.loss_b
    errors = [np.linalg.norm(h - gt) for h in pair.hypotheses]
    assert min(errors) < 1.5
    # 两个假设被非极大值抑制半径隔开
    assert np.linalg.norm(pair.c_a - pair.c_b) > 3.0


def test_subpixel_refinement_stays_close():
    conic = _conic(FIRST)
    gt = _gt(FIRST)
    pair = find_center_hypotheses(conic, FIRST.radius, K, SearchConfig(subpixel=True))
    assert min(np.linalg.norm(h - gt) for h in pair.hypotheses) < 1.5


def test_rectifying_homography_maps_to_circles():
    conic_1, conic_2 = _conic(FIRST), _conic(SECOND)
    gt = _gt(FIRST)
    h = build_rectifying_homography(conic_1, gt)
    rectified = h.rectify(conic_1)
    assert axis_ratio(rectified) == pytest.approx(1.0, abs=1e-6)
    assert_allclose(h.apply(gt)[0], conic_to_params(rectified).center, atol=1e-6)
    # 共面的第二个圆同样被校正为圆，半径比即物理半径比
    assert axis_ratio(h.rectify(conic_2)) == pytest.approx(1.0, abs=1e-6)
    assert rectified_radius_ratio(h, conic_1, conic_2) == pytest.approx(0.75, abs=1e-6)


def test_any_interior_candidate_rectifies_own_conic():
    conic_1, conic_2 = _conic(FIRST), _conic(SECOND)
    ellipse_center = conic_to_params(conic_1).center
    midway = 0.5 * (ellipse_center + _gt(FIRST))
    for candidate in (ellipse_center, midway, ellipse_center + [4.0, -3.0]):
        h = build_rectifying_homography(conic_1, candidate)
        rectified = h.rectify(conic_1)
        assert axis_ratio(rectified) == pytest.approx(1.0, abs=1e-6)
        assert_allclose(h.apply(candidate)[0], conic_to_params(rectified).center, atol=1e-6)

def test_rectifying_homography_rejects_outside_candidate():
    with pytest.raises(InvalidCandidateError):
        build_rectifying_homography(_conic(FIRST), [0.0, 0.0])


def test_ratio_disambiguation_selects_truth():
    conic_1, conic_2 = _conic(FIRST), _conic(SECOND)
    gt = _gt(FIRST)
    pair = find_center_hypotheses(conic_1, FIRST.radius, K)
    ratios = hypothesis_ratios(pair, conic_1, conic_2)
    truth = int(np.argmin([np.linalg.norm(h - gt) for h in pair.hypotheses]))
    assert ratios[truth] == pytest.approx(0.75, abs=0.02)
    chosen = disambiguate_by_ratio(pair, conic_1, conic_2, FIRST.radius / SECOND.radius)
    assert np.linalg.norm(chosen - gt) < 2.0


def test_disambiguation_errors():
    conic_1, conic_2 = _conic(FIRST), _conic(SECOND)
    outside = CenterHypothesisPair(
        c_a=np.array([0.0, 0.0]), c_b=np.array([1.0, 1.0]),
        loss_a=0.0, loss_b=0.0, distance_a=1.0, distance_b=1.0,
    )
    with pytest.raises(DisambiguationError):
        disambiguate_by_ratio(outside, conic_1, conic_2, 0.75)
    with pytest.raises(InputError):
        disambiguate_by_ratio(outside, conic_1, conic_2, 0.0)


def test_single_pair_short_circuits():
    pair = find_center_hypotheses(_conic(FRONTO), 0.5, K)
    assert disambiguate_by_ratio(pair, _conic(FRONTO), _conic(FRONTO), 1.0) is pair.c_a
    assert select_by_loss_rank(pair) is pair.c_a


def test_unknown_radius_uses_scale_free_loss():
    pair = find_center_hypotheses(_conic(FIRST), None, K)
    assert pair.loss_field.normalized
    assert min(np.linalg.norm(h - _gt(FIRST)) for h in pair.hypotheses) < 1.5
    assert not math.isnan(pair.distance_a)


def test_loss_rank_follows_stored_losses():
    c_a, c_b = np.array([640.0, 480.0]), np.array([650.0, 470.0])
    lower_b = CenterHypothesisPair(c_a=c_a, c_b=c_b, loss_a=0.5, loss_b=0.1, distance_a=2.0, distance_b=2.0)
    assert select_by_loss_rank(lower_b) is c_b
    tied = CenterHypothesisPair(c_a=c_a, c_b=c_b, loss_a=0.3, loss_b=0.3, distance_a=2.0, distance_b=2.0)
    assert select_by_loss_rank(tied) is c_a
    single = CenterHypothesisPair(c_a=c_a, c_b=c_a, loss_a=0.5, loss_b=0.1, distance_a=2.0, distance_b=2.0,
                                  single=True)
    assert select_by_loss_rank(single) is c_a
