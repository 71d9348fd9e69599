"""
估计器默认参数
所有阈值都可以通过环境变量（或 .env 文件）覆盖
"""

import os
from typing import Optional

from dotenv import load_dotenv

load_dotenv()


def _env_float(key: str, default: float) -> float:
    value = os.getenv(key)
    return float(value) if value not in (None, "") else default


def _env_int(key: str, default: int) -> int:
    value = os.getenv(key)
    return int(value) if value not in (None, "") else default


def _env_bool(key: str, default: bool) -> bool:
    value = os.getenv(key)
    if value in (None, ""):
        return default
    return value.strip().lower() in ("1", "true", "yes", "on")


# RANSAC：基准协议固定 1000 次迭代，不做按内点率的提前退出
RANSAC_MAX_ITERATIONS = _env_int("CIRCLECAL_RANSAC_ITERS", 1000)
RANSAC_SEED = _env_int("CIRCLECAL_SEED", 0)

# 圆模型内点阈值，单位为点到圆距离平方 (m²)，即 (0.05 m)²；已知噪声水平时作为下限
CIRCLE_INLIER_THRESHOLD = _env_float("CIRCLECAL_INLIER_THRESH", 0.05 ** 2)
# 已知各轴噪声 σ 时，内点管道半径取 k·σ。残差约为两个正交方向的平方和（2 自由度），k=2.5 时保留约 95.6% 的真内点
INLIER_SIGMA_FACTOR = _env_float("CIRCLECAL_INLIER_SIGMA_FACTOR", 2.5)
CIRCLE_MIN_SAMPLE = 5
# 解耦基线（平面 + 2D 圆）用三点外接圆作为最小模型
DECOUPLED_MIN_SAMPLE = 3

# PnP 内点阈值（像素，非平方）
PNP_INLIER_THRESHOLD_PX = _env_float("CIRCLECAL_PNP_THRESH_PX", 8.0)
PNP_MIN_SAMPLE = 4

# 特征值容差因子，实际容差 = 因子 * ||P||_F
EIGEN_TOLERANCE_FACTOR = 1e-9

# 弦长方差损失
CHORD_N_DIRS = _env_int("CIRCLECAL_N_DIRS", 36)
CHORD_DENOMINATOR_MIN = 1e-12
GRID_STEP_PX = 1.0
NMS_RADIUS_FLOOR_PX = 3.0
NMS_RADIUS_MINOR_FRACTION = 0.1
SUBPIXEL_REFINEMENT = _env_bool("CIRCLECAL_SUBPIXEL", False)
LOSS_FIELD_CHUNK = 4096

# 位姿细化 (阻尼最小二乘)
LM_MAX_ITERATIONS = 100
LM_GRADIENT_TOLERANCE = 1e-10
LM_INITIAL_DAMPING = 1e-3

# 三维点近似共面判定：中心化奇异值 s3/s1 低于该值走平面单应初始化
PLANAR_SINGULAR_RATIO = 1e-3

# 正交性容差
ORTHONORMAL_TOLERANCE = 1e-9


def get_ransac_config(kind: str = "circle", sigma: Optional[float] = None, **overrides):
    """
    获取一份新的 RansacConfig

    Args:
        kind: "circle"（CGA 圆）、"decoupled"（解耦基线）或 "pnp"
        sigma: 圆模型的点噪声标准差，给出时阈值按 circle_inlier_threshold(sigma) 设置
        **overrides: 覆盖任意字段

    Returns:
        RansacConfig 实例
    """
    from estimation.robust import RansacConfig

    # 解耦基线与 CGA 共用阈值与一致集下限，比较才公平
    if kind in ("circle", "decoupled"):
        params = dict(
            max_iterations=RANSAC_MAX_ITERATIONS,
            inlier_threshold=circle_inlier_threshold(sigma),
            min_sample=CIRCLE_MIN_SAMPLE,
            seed=RANSAC_SEED,
        )
    elif kind == "pnp":
        params = dict(
            max_iterations=RANSAC_MAX_ITERATIONS,
            inlier_threshold=PNP_INLIER_THRESHOLD_PX,
            min_sample=PNP_MIN_SAMPLE,
            seed=RANSAC_SEED,
        )
    else:
        raise ValueError(f"不支持的 RANSAC 类型: {kind}，可选: circle, decoupled, pnp")

    params.update(overrides)
    return RansacConfig(**params)


def circle_inlier_threshold(sigma: Optional[float] = None) -> float:
    """
    圆模型内点阈值（m²）

    Args:
        sigma: 点的各轴噪声标准差；None 时返回固定默认值

    Returns:
        max((INLIER_SIGMA_FACTOR·σ)², CIRCLE_INLIER_THRESHOLD)
    """
    if sigma is None:
        return CIRCLE_INLIER_THRESHOLD
    return max((INLIER_SIGMA_FACTOR * float(sigma)) ** 2, CIRCLE_INLIER_THRESHOLD)
