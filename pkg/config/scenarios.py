'''
    蒙特卡洛基准协议参数：
    三维圆拟合四种配置 A-D、离群点鲁棒性测试、二维中心估计、位姿估计
'''

import math
from copy import deepcopy


# 真值圆分布：c ~ U(-2,2)^3, r ~ U(1,5), n ~ N(0, I3) 归一化
GT_CENTER_RANGE = (-2.0, 2.0)
GT_RADIUS_RANGE = (1.0, 5.0)

# 仿真相机
CAMERA_INTRINSICS = {"fx": 600.0, "fy": 600.0, "cx": 640.0, "cy": 480.0}
IMAGE_SIZE = (1280, 960)

SCENARIO_DEFAULTS = {
    "A_full": {
        "trials": 1000,
        "sigma": 0.2,
        "n_points": 100,
        # 配置 A-D 默认比较两种 RANSAC；False 时全部点直接闭式拟合
        "robust": True,
        "arc": 2.0 * math.pi,
    },
    "B_partial_arc": {
        "trials": 1000,
        "sigma": 0.2,
        "n_points": 100,
        "robust": True,
        "arc": math.radians(70.0),
        # theta = u^2 * arc - 0.2 * arc，范围 [-0.2·arc, 0.8·arc]
        "offset_fraction": 0.2,
    },
    "C_sparse_clusters": {
        "trials": 1000,
        "sigma": 0.2,
        "n_points": 12,
        "robust": True,
        "cluster_counts": (2, 3),
        "cluster_spread": (math.pi / 30.0, math.pi / 9.0),
    },
    "D_symmetric_sparse": {
        "trials": 1000,
        "sigma": 0.2,
        "n_points": 20,
        "robust": True,
        "arc": math.radians(200.0),
        "interval_range": (0.8, 1.2),
    },
    "outlier_test": {
        "trials": 100,
        "sigma": 0.1,
        "n_points": 100,
        # 单次运行的离群比例；run_outlier_sweep 依次扫描 levels
        "p": 0.2,
        "levels": (0.1, 0.2, 0.3, 0.4, 0.5),
        # 离群点在以圆心为中心、边长 4r 的立方体内均匀采样
        "cube_factor": 4.0,
    },
    "twod_center": {
        "trials": 1000,
        "sigma": 1.0,
        "depth_range": (2.0, 5.0),
        "tilt_range": (math.radians(20.0), math.radians(60.0)),
        "radius_range": (0.3, 0.6),
        "boundary_samples": 64,
    },
    "pose_study": {
        "trials": 200,
        "sigma": 1.0,
        "pairs": 20,
        "depth_range": (3.0, 10.0),
        "tilt_range": (0.0, math.radians(60.0)),
        "radius_range": (0.3, 0.6),
        "boundary_samples": 64,
        "extrinsic_translation": 1.0,
        "pnp_threshold_px": 8.0,
        # >0 时三维中心由带噪 LiDAR 边界点经 CGA 拟合得到
        "lidar_sigma": 0.0,
    },
}

# 配置别名（CLI 里更短的写法）
SCENARIO_ALIASES = {
    "A": "A_full",
    "B": "B_partial_arc",
    "C": "C_sparse_clusters",
    "D": "D_symmetric_sparse",
    "outlier": "outlier_test",
    "twod": "twod_center",
    "pose": "pose_study",
}

# 生成视图时的最大重采样次数
MAX_VIEW_ATTEMPTS = 200


def normalize_scenario(name: str) -> str:
    value = (name or "").strip()
    return SCENARIO_ALIASES.get(value, value)


def get_scenario_defaults(name: str) -> dict:
    """获取场景默认参数（返回副本，调用方可以随意修改）"""
    key = normalize_scenario(name)
    if key not in SCENARIO_DEFAULTS:
        raise ValueError(f"不支持的场景: {name}，可选: {list(SCENARIO_DEFAULTS.keys())}")
    return deepcopy(SCENARIO_DEFAULTS[key])
