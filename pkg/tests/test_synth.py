"""合成数据与基准测试"""
import json
import os

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose

from synth import (
    CSV_COLUMNS,
    ScenarioKind,
    ScenarioSpec,
    add_noise,
    generate_view,
    inject_outliers,
    run_benchmark,
    sample_angles,
    sample_circle_gt,
    sample_view,
    default_intrinsics,
    observe_pose_pairs,
    run_outlier_sweep,
    summarize,
)
from config.scenarios import get_scenario_defaults
from geometry.core import RigidTransform, project
from utils.errors import InputError


def test_scenario_aliases_and_validation():
    spec = ScenarioSpec.from_defaults("outlier", trials=3, seed=1)
    assert spec.config == ScenarioKind.OUTLIER_TEST
    assert spec.sigma == pytest.approx(0.1)
    assert spec.extra["p"] == pytest.approx(0.2)
    with pytest.raises(InputError):
        ScenarioSpec.from_defaults("nope")
    with pytest.raises(InputError):
        ScenarioSpec("outlier_test", trials=1, extra={"p": 0.7})
    with pytest.raises(InputError):
        ScenarioSpec("A", trials=0)


def test_ground_truth_distribution():
    rng = np.random.default_rng(0)
    for _ in range(20):
        circle = sample_circle_gt(rng)
        assert np.all(np.abs(circle.center) <= 2.0)
        assert 1.0 <= circle.radius <= 5.0
        assert np.linalg.norm(circle.normal) == pytest.approx(1.0)


def test_partial_arc_range():
    params = get_scenario_defaults("B")
    angles = sample_angles(ScenarioKind.B_PARTIAL_ARC, np.random.default_rng(1), params)
    arc = params["arc"]
    assert len(angles) == 100
    assert angles.min() >= -0.2 * arc - 1e-12
    assert angles.max() <= 0.8 * arc + 1e-12


def test_sparse_clusters_count():
    angles = sample_angles(ScenarioKind.C_SPARSE_CLUSTERS, np.random.default_rng(2))
    assert len(angles) == 12


def test_symmetric_sparse_spacing():
    params = get_scenario_defaults("D")
    angles = sample_angles(ScenarioKind.D_SYMMETRIC_SPARSE, np.random.default_rng(3), params)
    gaps = np.diff(angles)
    assert len(angles) == 20
    assert gaps.sum() == pytest.approx(params["arc"])
    ratios = gaps[1:] / gaps[:-1]
    assert ratios.min() >= 0.8 / 1.2 - 1e-12
    assert ratios.max() <= 1.2 / 0.8 + 1e-12


def test_zero_noise_is_identity():
    pts = np.arange(12.0).reshape(4, 3)
    assert_allclose(add_noise(pts, 0.0, np.random.default_rng(0)), pts)


def test_inject_outliers():
    rng = np.random.default_rng(4)
    circle = sample_circle_gt(rng)
    pts = circle.points_at(np.linspace(0, 2 * np.pi, 50))
    mixed, mask = inject_outliers(pts, 0.2, circle, rng)
    assert len(mixed) == 60
    assert mask.sum() == 10
    assert np.all(np.abs(mixed[mask] - circle.center) <= 2.0 * circle.radius)
    with pytest.raises(InputError):
        inject_outliers(pts, 0.6, circle, rng)


def test_view_sampling_keeps_circles_in_image():
    rng = np.random.default_rng(5)
    params = get_scenario_defaults("twod")
    k = default_intrinsics()
    first, second = sample_view(rng, params, k)
    view = generate_view([first, second], RigidTransform.identity(), k, 0.0, rng)
    assert len(view.conics) == 2
    for conic, gt in zip(view.exact_conics, view.gt_centers):
        assert conic.contains(gt)
        assert 0 <= gt[0] < 1280 and 0 <= gt[1] < 960
    with pytest.raises(InputError):
        generate_view([first], RigidTransform.identity(), k, 0.0, rng, n_samples=10)


def test_noise_free_single_trial_has_zero_error():
    result = run_benchmark(ScenarioSpec("A_full", trials=1, sigma=0.0, seed=0))
    frame = result.frame
    assert list(frame.columns) == CSV_COLUMNS
    assert set(frame["method"]) == {"cga", "decoupled"}
    assert not frame["failed"].any()
    assert frame["e_center_m"].max() < 1e-6
    assert frame["e_radius_m"].max() < 1e-6


def test_benchmark_is_deterministic_and_written(tmp_path):
    spec = ScenarioSpec("C", trials=4, sigma=0.05, seed=3)
    run_benchmark(spec, out_dir=str(tmp_path / "a"))
    run_benchmark(spec, out_dir=str(tmp_path / "b"))
    a = (tmp_path / "a" / "results.csv").read_bytes()
    b = (tmp_path / "b" / "results.csv").read_bytes()
    assert a == b
    assert os.path.exists(tmp_path / "a" / "summary.json")


def test_summary_matches_csv(tmp_path):
    result = run_benchmark(ScenarioSpec("A", trials=5, sigma=0.1, seed=2), out_dir=str(tmp_path))
    frame = pd.read_csv(tmp_path / "results.csv")
    for method, group in frame.groupby("method"):
        values = group["e_center_m"].to_numpy()
        stats = result.summary[method]["e_center_m"]
        assert stats["mean"] == pytest.approx(values.mean(), abs=1e-9)
        assert stats["std"] == pytest.approx(values.std(), abs=1e-9)
        assert stats["median"] == pytest.approx(np.median(values), abs=1e-9)
    assert summarize(result.frame) == result.summary


def test_parallel_matches_serial():
    spec = ScenarioSpec("A", trials=3, sigma=0.1, seed=4)
    serial = run_benchmark(spec).frame
    parallel = run_benchmark(spec, workers=2).frame
    pd.testing.assert_frame_equal(serial, parallel)


def test_outlier_scenario_runs_ransac():
    spec = ScenarioSpec.from_defaults("outlier", trials=3, seed=7, p=0.2)
    frame = run_benchmark(spec).frame
    cga = frame[frame["method"] == "cga"]
    assert not cga["failed"].any()
    assert cga["e_center_m"].mean() < 0.5


def test_twod_noise_free_refined_center():
    spec = ScenarioSpec.from_defaults("twod", trials=4, sigma=0.0, seed=1)
    frame = run_benchmark(spec).frame
    refined = frame[frame["method"] == "refined"]
    assert not refined["failed"].any()
    assert np.isfinite(refined["e_2d_px"]).all()
    assert refined["e_2d_px"].min() < 1.5
    assert set(frame["method"]) == {"ellipse_center", "center_of_mass", "refined", "refined_loss_rank"}


def test_pose_pairs_contribute_primary_circle_only():
    params = get_scenario_defaults("pose")
    params["pairs"] = 3
    k = default_intrinsics()
    extrinsic = RigidTransform.from_rotvec([0.1, -0.2, 0.3], [0.2, 0.1, -0.1])
    obs = observe_pose_pairs(params, extrinsic, k, 0.0, np.random.default_rng(6))
    for column in (obs.centers_l, obs.true_l, obs.gt_px, obs.ellipse_px, obs.com_px, obs.homography_px, obs.paired):
        assert len(column) == 3
    for center, gt, corr in zip(obs.true_l, obs.gt_px, obs.paired):
        assert_allclose(project(center, extrinsic, k), gt, atol=1e-9)
        assert_allclose(corr.p3d, center)


def test_outlier_sweep_writes_each_level(tmp_path):
    spec = ScenarioSpec.from_defaults("outlier", trials=1, seed=2, levels=(0.1, 0.3))
    results = run_outlier_sweep(spec, out_dir=str(tmp_path))
    assert list(results) == [0.1, 0.3]
    assert (tmp_path / "p_0.10" / "results.csv").exists()
    assert (tmp_path / "p_0.30" / "summary.json").exists()
    sweep = json.loads((tmp_path / "sweep.json").read_text(encoding="utf-8"))
    assert set(sweep) == {"0.10", "0.30"}
    assert set(sweep["0.30"]) == {"cga", "decoupled"}


def test_outlier_sweep_validation():
    with pytest.raises(InputError):
        ScenarioSpec.from_defaults("outlier", trials=1, levels=(0.1, 0.7))
    with pytest.raises(InputError):
        run_outlier_sweep(ScenarioSpec("A", trials=1))


@pytest.mark.slow
def test_pose_study_small():
    spec = ScenarioSpec.from_defaults("pose", trials=1, sigma=0.5, seed=3, pairs=10)
    frame = run_benchmark(spec).frame
    paired = frame[frame["method"] == "refined_paired"].iloc[0]
    assert not paired["failed"]
    assert paired["e_rot_rad"] < 0.02
    assert paired["e_reproj_px"] < 3.0


@pytest.mark.slow
def test_outlier_sweep_cga_beats_decoupled():
    spec = ScenarioSpec.from_defaults("outlier", trials=50, seed=11, levels=(0.1, 0.3, 0.5))
    results = run_outlier_sweep(spec)
    cga_means = []
    for result in results.values():
        cga = result.summary["cga"]["e_center_m"]["mean"]
        decoupled = result.summary["decoupled"]["e_center_m"]["mean"]
        assert cga < 0.072
        assert cga / decoupled < 0.6
        cga_means.append(cga)
    assert 0.017 <= np.mean(cga_means) <= 0.072


@pytest.mark.slow
def test_full_and_partial_arc_cga_beats_decoupled():
    full = run_benchmark(ScenarioSpec.from_defaults("A", trials=40, seed=5)).summary
    assert full["cga"]["e_center_m"]["mean"] < 0.7 * full["decoupled"]["e_center_m"]["mean"]
    arc = run_benchmark(ScenarioSpec.from_defaults("B", trials=40, seed=5)).summary
    assert arc["cga"]["e_center_m"]["mean"] < arc["decoupled"]["e_center_m"]["mean"]


@pytest.mark.slow
def test_refined_center_beats_ellipse_center():
    summary = run_benchmark(ScenarioSpec.from_defaults("twod", trials=60, seed=9)).summary
    refined = summary["refined"]["e_2d_px"]
    assert refined["median"] < 2.0
    for baseline in ("ellipse_center", "center_of_mass"):
        assert refined["mean"] < summary[baseline]["e_2d_px"]["mean"]


@pytest.mark.slow
def test_refined_centers_improve_pose():
    summary = run_benchmark(ScenarioSpec.from_defaults("pose", trials=20, seed=13)).summary
    for refined in ("refined_homography", "refined_paired"):
        for baseline in ("ellipse_center", "center_of_mass"):
            for metric in ("e_reproj_px", "e_rot_rad"):
                assert summary[refined][metric]["median"] < summary[baseline][metric]["median"]
