"""
生成演示 / 测试用的数据文件

用法:
    python scripts/make_fixtures.py --out data
"""

import argparse
import math
import os
import sys
from typing import Dict

import numpy as np
import pandas as pd

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from config.estimation import CIRCLE_INLIER_THRESHOLD
from geometry.cga import circle_distance2
from geometry.core import Circle3D, RigidTransform, project_points
from geometry.ellipse import project_circle_to_conic
from estimation.robust import point_circle_euclidean2
from result_storage import write_frame, write_json
from synth import default_intrinsics, sample_view
from utils.logger import get_module_logger

logger = get_module_logger("fixtures")

RING_CIRCLE = Circle3D(np.array([1.0, 2.0, 3.0]), np.array([0.0, 0.0, 1.0]), 2.0)


def _write_cloud(points: np.ndarray, path: str):
    write_frame(pd.DataFrame(points, columns=["x", "y", "z"]), path)


def build_ring(out_dir: str) -> str:
    """无噪声圆环：c=(1,2,3)，n=z，r=2，每 30° 一个点"""
    path = os.path.join(out_dir, "ring.csv")
    _write_cloud(RING_CIRCLE.points_at(np.radians(np.arange(0, 360, 30))), path)
    return path


def build_outlier_cloud(out_dir: str, seed: int = 3, n_inliers: int = 60, n_outliers: int = 20) -> Dict:
    """
    无噪声圆上点 + 远离圆的离群点，打乱后写出；mask.json 记录真值内点下标

    离群点与圆的距离（欧氏与共形近似两种度量）都远大于默认内点阈值
    """
    rng = np.random.default_rng(seed)
    circle = Circle3D(np.array([0.5, -1.0, 2.0]), np.array([0.3, -0.2, 0.9]), 1.5)
    inliers = circle.points_at(rng.uniform(0.0, 2.0 * math.pi, size=n_inliers))

    outliers = []
    while len(outliers) < n_outliers:
        p = circle.center + rng.uniform(-2.0 * circle.radius, 2.0 * circle.radius, size=3)
        far = (point_circle_euclidean2(p[None], circle)[0] > 0.3 ** 2
               and circle_distance2(p[None], circle)[0] > 10.0 * CIRCLE_INLIER_THRESHOLD)
        if far:
            outliers.append(p)

    points = np.vstack([inliers, np.array(outliers)])
    is_inlier = np.concatenate([np.ones(n_inliers, dtype=bool), np.zeros(n_outliers, dtype=bool)])
    order = rng.permutation(len(points))
    points, is_inlier = points[order], is_inlier[order]

    cloud = os.path.join(out_dir, "outliers.csv")
    mask = os.path.join(out_dir, "outliers_mask.json")
    _write_cloud(points, cloud)
    write_json({
        "inliers": np.flatnonzero(is_inlier).tolist(),
        "inlier_count": n_inliers,
        "circle": circle.to_dict(),
    }, mask)
    return {"cloud": cloud, "mask": mask}


def oblique_pair():
    """相机坐标系下 60° 倾斜、1.5 m 远的共面圆对"""
    tilt = math.radians(60.0)
    normal = np.array([math.sin(tilt), 0.0, -math.cos(tilt)])
    along = np.array([0.0, 1.0, 0.0])
    anchor = np.array([0.1, 0.0, 1.5])
    return (
        Circle3D(anchor - 0.4 * along, normal, 0.3),
        Circle3D(anchor + 0.4 * along, normal, 0.4),
    )


def build_refine_fixture(out_dir: str) -> Dict:
    """
    斜视共面圆对的精确椭圆 + 正视单圆，gt.json 记录真值投影圆心与半径
    """
    k = default_intrinsics()
    identity = RigidTransform.identity()
    first, second = oblique_pair()
    fronto = Circle3D(np.array([0.0, 0.0, 3.0]), np.array([0.0, 0.0, 1.0]), 0.5)

    paths = {
        "intrinsics": os.path.join(out_dir, "intrinsics.json"),
        "ellipse_1": os.path.join(out_dir, "ellipse_1.json"),
        "ellipse_2": os.path.join(out_dir, "ellipse_2.json"),
        "fronto": os.path.join(out_dir, "ellipse_fronto.json"),
        "gt": os.path.join(out_dir, "refine_gt.json"),
    }
    write_json(k.to_dict(), paths["intrinsics"])
    write_json(project_circle_to_conic(first, identity, k).to_dict(), paths["ellipse_1"])
    write_json(project_circle_to_conic(second, identity, k).to_dict(), paths["ellipse_2"])
    write_json(project_circle_to_conic(fronto, identity, k).to_dict(), paths["fronto"])
    centers = project_points(np.array([first.center, second.center, fronto.center]), identity, k)
    write_json({
        "center_1": centers[0].tolist(),
        "center_2": centers[1].tolist(),
        "center_fronto": centers[2].tolist(),
        "radius_1": first.radius,
        "radius_2": second.radius,
        "radius_fronto": fronto.radius,
        "ratio": first.radius / second.radius,
    }, paths["gt"])
    return paths


def build_calibration_job(out_dir: str, seed: int = 11, n_frames: int = 8,
                          coplanar: bool = True, name: str = "job.json") -> Dict:
    """
    已知外参的合成标定任务：每帧一对共面圆，三维边界点在 LiDAR 坐标系，椭圆为精确投影

    Returns:
        {"job": 任务路径, "gt": 真值外参路径}
    """
    rng = np.random.default_rng(seed)
    k = default_intrinsics()
    extrinsic = RigidTransform.from_rotvec(np.array([0.05, -0.1, 0.02]), np.array([0.2, -0.1, 0.3]))
    to_lidar = extrinsic.inverse()
    params = {
        "depth_range": (2.5, 4.5),
        "tilt_range": (math.radians(30.0), math.radians(60.0)),
        "radius_range": (0.3, 0.6),
    }

    os.makedirs(out_dir, exist_ok=True)
    intrinsics_path = os.path.join(out_dir, "intrinsics.json")
    write_json(k.to_dict(), intrinsics_path)

    frames = []
    for f_idx in range(n_frames):
        circles = []
        for c_idx, circle_cam in enumerate(sample_view(rng, params, k)):
            circle_l = circle_cam.transformed(to_lidar)
            points_name = f"frame{f_idx}_circle{c_idx}.csv"
            ellipse_name = f"frame{f_idx}_circle{c_idx}_ellipse.json"
            _write_cloud(circle_l.points_at(np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)),
                         os.path.join(out_dir, points_name))
            write_json(project_circle_to_conic(circle_l, extrinsic, k).to_dict(),
                       os.path.join(out_dir, ellipse_name))
            circles.append({"points": points_name, "ellipse": ellipse_name, "radius": circle_l.radius})
        frame = {"circles": circles}
        if coplanar:
            frame["coplanar_pairs"] = [{"primary": 0, "secondary": 1}]
        frames.append(frame)

    job_path = os.path.join(out_dir, name)
    gt_path = os.path.join(out_dir, "extrinsics_gt.json")
    write_json({
        "intrinsics": "intrinsics.json",
        "frames": frames,
        "options": {"subpixel": True, "mode": "auto" if coplanar else "paired"},
    }, job_path)
    write_json(extrinsic.to_dict(), gt_path)
    return {"job": job_path, "gt": gt_path}


def build_all(out_dir: str) -> Dict:
    os.makedirs(out_dir, exist_ok=True)
    paths = {"ring": build_ring(out_dir)}
    paths.update(build_outlier_cloud(out_dir))
    paths.update(build_refine_fixture(out_dir))
    paths.update(build_calibration_job(os.path.join(out_dir, "calib")))
    logger.info(f"fixtures 已生成到 {out_dir}")
    return paths


def main():
    parser = argparse.ArgumentParser(description="生成演示 / 测试数据")
    parser.add_argument("--out", default="data", help="输出目录")
    args = parser.parse_args()
    build_all(args.out)


if __name__ == "__main__":
    main()
