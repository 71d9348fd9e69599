"""
合成数据与蒙特卡洛基准
三维圆拟合（配置 A-D、离群点）、二维圆心投影修正、外参估计三类实验的数据生成、
逐次试验、误差统计与结果落盘
"""

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from functools import partial
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.spatial.transform import Rotation

from config.estimation import get_ransac_config
from config.scenarios import (
    CAMERA_INTRINSICS,
    GT_CENTER_RANGE,
    GT_RADIUS_RANGE,
    IMAGE_SIZE,
    MAX_VIEW_ATTEMPTS,
    get_scenario_defaults,
    normalize_scenario,
)
from estimation.center_refine import (
    SearchConfig,
    disambiguate_by_ratio,
    find_center_hypotheses,
    select_by_loss_rank,
)
from estimation.pnp import (
    AmbiguousCorrespondence,
    Correspondence,
    point_errors,
    solve_pnp_paired,
    solve_pnp_ransac,
)
from estimation.robust import (
    fit_circle_decoupled,
    ransac_fit_circle,
    ransac_fit_circle_decoupled,
)
from geometry.cga import fit_circle_cga
from geometry.core import (
    Circle3D,
    Intrinsics,
    RigidTransform,
    circle_basis,
    project_points,
    rotation_error,
    translation_error,
)
from geometry.ellipse import (
    Conic,
    center_of_mass,
    conic_to_params,
    fit_conic,
    project_circle_to_conic,
)
from utils.errors import CircleCalError, InputError, ProjectionError
from utils.logger import get_module_logger

logger = get_module_logger("synth")


class ScenarioKind(str, Enum):
    A_FULL = "A_full"
    B_PARTIAL_ARC = "B_partial_arc"
    C_SPARSE_CLUSTERS = "C_sparse_clusters"
    D_SYMMETRIC_SPARSE = "D_symmetric_sparse"
    OUTLIER_TEST = "outlier_test"
    TWOD_CENTER = "twod_center"
    POSE_STUDY = "pose_study"


ACCURACY_KINDS = (
    ScenarioKind.A_FULL,
    ScenarioKind.B_PARTIAL_ARC,
    ScenarioKind.C_SPARSE_CLUSTERS,
    ScenarioKind.D_SYMMETRIC_SPARSE,
)

METHODS = {
    ScenarioKind.A_FULL: ("cga", "decoupled"),
    ScenarioKind.B_PARTIAL_ARC: ("cga", "decoupled"),
    ScenarioKind.C_SPARSE_CLUSTERS: ("cga", "decoupled"),
    ScenarioKind.D_SYMMETRIC_SPARSE: ("cga", "decoupled"),
    ScenarioKind.OUTLIER_TEST: ("cga", "decoupled"),
    ScenarioKind.TWOD_CENTER: ("ellipse_center", "center_of_mass", "refined", "refined_loss_rank"),
    ScenarioKind.POSE_STUDY: ("ellipse_center", "center_of_mass", "refined_homography", "refined_paired"),
}

CSV_COLUMNS = [
    "trial", "method", "e_center_m", "e_radius_m", "e_2d_px",
    "e_reproj_px", "e_rot_rad", "e_trans_m", "failed",
]
ERROR_COLUMNS = CSV_COLUMNS[2:-1]


@dataclass
class ScenarioSpec:
    """
    基准场景

    Args:
        config: 场景名（也接受 A/B/C/D/outlier/twod/pose 简写）
        trials: 试验次数
        sigma: 噪声标准差（三维场景为米，二维场景为像素）
        seed: 随机种子，第 i 次试验使用 seed + i
        extra: 覆盖场景默认参数（如 p、arc、pairs、robust）
    """
    config: ScenarioKind
    trials: int = 1
    sigma: float = 0.0
    seed: int = 0
    extra: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        try:
            self.config = ScenarioKind(normalize_scenario(getattr(self.config, "value", self.config)))
        except ValueError as e:
            raise InputError(f"不支持的场景: {self.config}") from e
        if int(self.trials) < 1:
            raise InputError(f"trials 必须 ≥ 1，实际 {self.trials}")
        if not self.sigma >= 0:
            raise InputError(f"sigma 必须非负，实际 {self.sigma}")
        params = get_scenario_defaults(self.config.value)
        params.pop("trials", None)
        params.pop("sigma", None)
        params.update(self.extra or {})
        for p in (params.get("p", 0.0), *params.get("levels", ())):
            if not 0.0 <= p <= 0.5:
                raise InputError(f"离群比例 p 必须在 [0, 0.5]，实际 {p}")
        self.trials = int(self.trials)
        self.sigma = float(self.sigma)
        self.extra = params

    @classmethod
    def from_defaults(cls, name: str, trials: Optional[int] = None, sigma: Optional[float] = None,
                      seed: int = 0, **extra) -> "ScenarioSpec":
        """用场景默认的试验次数与噪声构造，参数可覆盖"""
        try:
            defaults = get_scenario_defaults(name)
        except ValueError as e:
            raise InputError(str(e)) from e
        return cls(
            config=name,
            trials=defaults["trials"] if trials is None else trials,
            sigma=defaults["sigma"] if sigma is None else sigma,
            seed=seed,
            extra=extra,
        )


@dataclass
class TrialRecord:
    """一次试验中一个方法的结果；误差为 NaN 表示该指标不适用或方法失败"""
    trial: int
    method: str
    e_center_m: float = float("nan")
    e_radius_m: float = float("nan")
    e_2d_px: float = float("nan")
    e_reproj_px: float = float("nan")
    e_rot_rad: float = float("nan")
    e_trans_m: float = float("nan")
    failed: bool = False
    gt: Any = field(default=None, repr=False)
    estimate: Any = field(default=None, repr=False)

    def to_row(self) -> Dict[str, Any]:
        row = asdict(self)
        return {col: row[col] for col in CSV_COLUMNS}


@dataclass
class ViewObservation:
    """一帧图像中的观测：拟合二次曲线、精确二次曲线、真值投影圆心"""
    conics: List[Conic]
    exact_conics: List[Conic]
    gt_centers: np.ndarray
    boundary_pixels: List[np.ndarray]


@dataclass
class BenchmarkResult:
    records: List[TrialRecord]
    frame: pd.DataFrame
    summary: Dict[str, Any]


# ============ 三维圆采样 ============

def sample_circle_gt(rng: np.random.Generator) -> Circle3D:
    """c ~ U(-2,2)³, r ~ U(1,5), n ~ N(0, I3) 归一化"""
    center = rng.uniform(*GT_CENTER_RANGE, size=3)
    radius = rng.uniform(*GT_RADIUS_RANGE)
    normal = rng.normal(size=3)
    while np.linalg.norm(normal) < 1e-9:
        normal = rng.normal(size=3)
    return Circle3D(center, normal, radius)


def sample_angles(config: ScenarioKind, rng: np.random.Generator, params: Optional[Dict] = None) -> np.ndarray:
    """按配置的角度分布采样圆上参数角"""
    kind = ScenarioKind(normalize_scenario(getattr(config, "value", config)))
    p = params if params is not None else get_scenario_defaults(kind.value)
    n = int(p["n_points"])

    if kind == ScenarioKind.B_PARTIAL_ARC:
        u = rng.uniform(0.0, 1.0, size=n)
        return u * u * p["arc"] - p["offset_fraction"] * p["arc"]

    if kind == ScenarioKind.C_SPARSE_CLUSTERS:
        lo, hi = p["cluster_counts"]
        n_clusters = int(rng.integers(lo, hi + 1))
        centers = rng.uniform(0.0, 2.0 * math.pi, size=n_clusters)
        spreads = rng.uniform(*p["cluster_spread"], size=n_clusters)
        counts = [len(part) for part in np.array_split(np.arange(n), n_clusters)]
        return np.concatenate([
            rng.normal(centers[i], spreads[i], size=counts[i]) for i in range(n_clusters)
        ])

    if kind == ScenarioKind.D_SYMMETRIC_SPARSE:
        intervals = rng.uniform(*p["interval_range"], size=n - 1)
        intervals = intervals / intervals.sum() * p["arc"]
        start = rng.uniform(0.0, 2.0 * math.pi)
        return start + np.concatenate([[0.0], np.cumsum(intervals)])

    # A_full 与离群点实验：整圆均匀
    return rng.uniform(0.0, p.get("arc", 2.0 * math.pi), size=n)


def sample_points(circle: Circle3D, config: ScenarioKind, rng: np.random.Generator,
                  params: Optional[Dict] = None) -> np.ndarray:
    """圆上无噪声点 (N, 3)"""
    return circle.points_at(sample_angles(config, rng, params))


def add_noise(points: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """逐轴独立同分布高斯噪声"""
    p = np.asarray(points, dtype=float)
    if sigma == 0:
        return p.copy()
    return p + rng.normal(0.0, sigma, size=p.shape)


def inject_outliers(points: np.ndarray, p: float, circle: Circle3D, rng: np.random.Generator,
                    cube_factor: float = 4.0) -> Tuple[np.ndarray, np.ndarray]:
    """
    在以圆心为中心、边长 cube_factor·r 的立方体内均匀加入 round(p·N) 个离群点，然后打乱

    Returns:
        (点集, 离群点掩码)
    """
    if not 0.0 <= p <= 0.5:
        raise InputError(f"离群比例 p 必须在 [0, 0.5]，实际 {p}")
    pts = np.asarray(points, dtype=float)
    n_out = int(round(p * len(pts)))
    half = 0.5 * cube_factor * circle.radius
    outliers = circle.center + rng.uniform(-half, half, size=(n_out, 3))
    combined = np.vstack([pts, outliers])
    mask = np.concatenate([np.zeros(len(pts), dtype=bool), np.ones(n_out, dtype=bool)])
    order = rng.permutation(len(combined))
    return combined[order], mask[order]


# ============ 图像观测 ============

def default_intrinsics() -> Intrinsics:
    return Intrinsics(**CAMERA_INTRINSICS)


def sample_coplanar_pair(rng: np.random.Generator, params: Dict) -> Tuple[Circle3D, Circle3D]:
    """
    相机坐标系下两个共面、不同心、互不相交的圆

    平面倾角 tilt 取自 params["tilt_range"]，锚点深度取自 params["depth_range"]
    """
    depth = rng.uniform(*params["depth_range"])
    tilt = rng.uniform(*params["tilt_range"])
    azimuth = rng.uniform(0.0, 2.0 * math.pi)
    normal = np.array([
        math.sin(tilt) * math.cos(azimuth),
        math.sin(tilt) * math.sin(azimuth),
        -math.cos(tilt),
    ])
    lateral = rng.uniform(-0.15, 0.15, size=2)
    anchor = depth * np.array([lateral[0], lateral[1], 1.0])

    r1, r2 = rng.uniform(*params["radius_range"], size=2)
    gap = rng.uniform(0.1, 0.3)
    u, v = circle_basis(normal)
    alpha = rng.uniform(0.0, 2.0 * math.pi)
    direction = math.cos(alpha) * u + math.sin(alpha) * v
    half = 0.5 * (r1 + r2 + gap)
    return (
        Circle3D(anchor - half * direction, normal, r1),
        Circle3D(anchor + half * direction, normal, r2),
    )


def _in_image(pixels: np.ndarray, image_size: Tuple[int, int], margin: float = 2.0) -> bool:
    w, h = image_size
    return bool(np.all((pixels[:, 0] >= margin) & (pixels[:, 0] <= w - 1 - margin)
                       & (pixels[:, 1] >= margin) & (pixels[:, 1] <= h - 1 - margin)))


def sample_view(rng: np.random.Generator, params: Dict, k: Intrinsics,
                image_size: Tuple[int, int] = IMAGE_SIZE) -> Tuple[Circle3D, Circle3D]:
    """
    重采样共面圆对，直到两个圆完整位于图像内

    Raises:
        ProjectionError: 超过 MAX_VIEW_ATTEMPTS 次仍无法放入视野
    """
    identity = RigidTransform.identity()
    angles = np.linspace(0.0, 2.0 * math.pi, 72, endpoint=False)
    for _ in range(MAX_VIEW_ATTEMPTS):
        pair = sample_coplanar_pair(rng, params)
        try:
            if all(_in_image(project_points(c.points_at(angles), identity, k), image_size) for c in pair):
                return pair
        except ProjectionError:
            continue
    raise ProjectionError(f"{MAX_VIEW_ATTEMPTS} 次采样后圆对仍不能完整位于图像内")


def generate_view(circles: Sequence[Circle3D], pose: RigidTransform, k: Intrinsics,
                  sigma_px: float, rng: np.random.Generator, n_samples: int = 64) -> ViewObservation:
    """
    边界点均匀采样、投影、加像素噪声、拟合二次曲线；真值投影圆心由无噪声几何解析给出

    Raises:
        ProjectionError: 圆位于相机后方
    """
    if n_samples < 50:
        raise InputError(f"每个圆至少采样 50 个边界点，实际 {n_samples}")
    conics, exact, boundary = [], [], []
    for circle in circles:
        angles = rng.uniform(0.0, 2.0 * math.pi, size=n_samples)
        pixels = project_points(circle.points_at(angles), pose, k)
        if sigma_px > 0:
            pixels = pixels + rng.normal(0.0, sigma_px, size=pixels.shape)
        boundary.append(pixels)
        conics.append(fit_conic(pixels))
        exact.append(project_circle_to_conic(circle, pose, k))
    gt = project_points(np.array([c.center for c in circles]), pose, k)
    return ViewObservation(conics=conics, exact_conics=exact, gt_centers=gt, boundary_pixels=boundary)


# ============ 单次试验 ============

def _failed(trial: int, methods: Sequence[str]) -> List[TrialRecord]:
    return [TrialRecord(trial=trial, method=m, failed=True) for m in methods]


def _accuracy_trial(spec: ScenarioSpec, trial: int, rng: np.random.Generator) -> List[TrialRecord]:
    params = spec.extra
    circle = sample_circle_gt(rng)
    points = add_noise(sample_points(circle, spec.config, rng, params), spec.sigma, rng)
    robust = bool(params.get("robust", True))

    if spec.config == ScenarioKind.OUTLIER_TEST:
        points, _ = inject_outliers(points, params["p"], circle, rng, params["cube_factor"])
        robust = True

    # 两种 RANSAC 用同一个按噪声水平确定的阈值
    cga_cfg = get_ransac_config("circle", sigma=spec.sigma, seed=spec.seed + trial)
    decoupled_cfg = get_ransac_config("decoupled", sigma=spec.sigma, seed=spec.seed + trial)
    estimators = {
        "cga": (lambda p: ransac_fit_circle(p, cga_cfg).best_model)
        if robust else (lambda p: fit_circle_cga(p).circle),
        "decoupled": (lambda p: ransac_fit_circle_decoupled(p, decoupled_cfg).best_model)
        if robust else fit_circle_decoupled,
    }
    records = []
    for method, estimate in estimators.items():
        try:
            fitted = estimate(points)
            records.append(TrialRecord(
                trial=trial,
                method=method,
                e_center_m=float(np.linalg.norm(fitted.center - circle.center)),
                e_radius_m=abs(fitted.radius - circle.radius),
                gt=circle,
                estimate=fitted,
            ))
        except CircleCalError as e:
            logger.warning(f"试验 {trial} 方法 {method} 失败: {e}")
            records.append(TrialRecord(trial=trial, method=method, failed=True, gt=circle))
    return records


def _twod_trial(spec: ScenarioSpec, trial: int, rng: np.random.Generator) -> List[TrialRecord]:
    params = spec.extra
    k = default_intrinsics()
    first, second = sample_view(rng, params, k)
    view = generate_view([first, second], RigidTransform.identity(), k, spec.sigma, rng,
                         n_samples=params["boundary_samples"])
    conic, partner = view.conics
    gt = view.gt_centers[0]
    search_cfg = SearchConfig(subpixel=bool(params.get("subpixel", False)))

    pair_cache: Dict[str, Any] = {}

    def hypotheses():
        if "pair" not in pair_cache:
            pair_cache["pair"] = find_center_hypotheses(conic, first.radius, k, search_cfg)
        return pair_cache["pair"]

    estimators = {
        "ellipse_center": lambda: conic_to_params(conic).center,
        "center_of_mass": lambda: center_of_mass(conic),
        "refined": lambda: disambiguate_by_ratio(hypotheses(), conic, partner, first.radius / second.radius),
        "refined_loss_rank": lambda: select_by_loss_rank(hypotheses()),
    }
    records = []
    for method, estimate in estimators.items():
        try:
            est = np.asarray(estimate())
            records.append(TrialRecord(trial=trial, method=method,
                                       e_2d_px=float(np.linalg.norm(est - gt)), gt=gt, estimate=est))
        except CircleCalError as e:
            logger.warning(f"试验 {trial} 方法 {method} 失败: {e}")
            records.append(TrialRecord(trial=trial, method=method, failed=True, gt=gt))
    return records


def _lidar_center(circle: Circle3D, sigma: float, rng: np.random.Generator, n_samples: int) -> np.ndarray:
    if sigma <= 0:
        return circle.center
    pts = add_noise(circle.points_at(rng.uniform(0.0, 2.0 * math.pi, size=n_samples)), sigma, rng)
    return fit_circle_cga(pts).circle.center


@dataclass
class PoseObservations:
    """
    位姿实验一次试验的观测：每个共面圆对只有主圆作为对应点，副圆仅用于半径比消歧

    各列表按圆对顺序一一对应
    """
    centers_l: List[np.ndarray] = field(default_factory=list)
    true_l: List[np.ndarray] = field(default_factory=list)
    gt_px: List[np.ndarray] = field(default_factory=list)
    ellipse_px: List[np.ndarray] = field(default_factory=list)
    com_px: List[np.ndarray] = field(default_factory=list)
    homography_px: List[np.ndarray] = field(default_factory=list)
    paired: List[AmbiguousCorrespondence] = field(default_factory=list)


def observe_pose_pairs(params: Dict[str, Any], extrinsic: RigidTransform, k: Intrinsics, sigma: float,
                       rng: np.random.Generator) -> PoseObservations:
    """采样 params["pairs"] 个共面圆对并生成主圆的各种二维圆心估计"""
    to_lidar = extrinsic.inverse()
    obs = PoseObservations()
    for _ in range(int(params["pairs"])):
        pair_cam = sample_view(rng, params, k)
        primary, secondary = [c.transformed(to_lidar) for c in pair_cam]
        view = generate_view([primary, secondary], extrinsic, k, sigma, rng, n_samples=params["boundary_samples"])
        conic, partner = view.conics
        center_l = _lidar_center(primary, params["lidar_sigma"], rng, params["boundary_samples"])
        hyps = find_center_hypotheses(conic, primary.radius, k)
        obs.centers_l.append(center_l)
        obs.true_l.append(primary.center)
        obs.gt_px.append(view.gt_centers[0])
        obs.ellipse_px.append(conic_to_params(conic).center)
        obs.com_px.append(center_of_mass(conic))
        obs.homography_px.append(disambiguate_by_ratio(hyps, conic, partner, primary.radius / secondary.radius))
        obs.paired.append(AmbiguousCorrespondence.from_pair(center_l, hyps))
    return obs


def _pose_trial(spec: ScenarioSpec, trial: int, rng: np.random.Generator) -> List[TrialRecord]:
    params = spec.extra
    k = default_intrinsics()
    extent = params["extrinsic_translation"]
    extrinsic = RigidTransform(
        Rotation.random(random_state=rng).as_matrix(),
        rng.uniform(-extent, extent, size=3),
    )
    obs = observe_pose_pairs(params, extrinsic, k, spec.sigma, rng)

    points_l = np.array(obs.centers_l)
    true_points = np.array(obs.true_l)
    gt_px = np.array(obs.gt_px)
    cfg = get_ransac_config("pnp", seed=spec.seed + trial, inlier_threshold=params["pnp_threshold_px"])

    def correspondences(pixels):
        return [Correspondence(p, q) for p, q in zip(points_l, pixels)]

    solvers = {
        "ellipse_center": lambda: solve_pnp_ransac(correspondences(obs.ellipse_px), k, cfg),
        "center_of_mass": lambda: solve_pnp_ransac(correspondences(obs.com_px), k, cfg),
        "refined_homography": lambda: solve_pnp_ransac(correspondences(obs.homography_px), k, cfg),
        "refined_paired": lambda: solve_pnp_paired(obs.paired, k, cfg),
    }
    records = []
    for method, solve in solvers.items():
        try:
            estimate = solve()
            pose = estimate.transform
            records.append(TrialRecord(
                trial=trial,
                method=method,
                e_reproj_px=float(point_errors(pose, true_points, gt_px, k).mean()),
                e_rot_rad=rotation_error(pose.rotation, extrinsic.rotation),
                e_trans_m=translation_error(pose.translation, extrinsic.translation),
                gt=extrinsic,
                estimate=pose,
            ))
        except CircleCalError as e:
            logger.warning(f"试验 {trial} 方法 {method} 失败: {e}")
            records.append(TrialRecord(trial=trial, method=method, failed=True, gt=extrinsic))
    return records


def run_trial(spec: ScenarioSpec, trial: int) -> List[TrialRecord]:
    """单次试验，随机数生成器种子为 spec.seed + trial，与执行顺序无关"""
    rng = np.random.default_rng(spec.seed + trial)
    methods = METHODS[spec.config]
    try:
        if spec.config == ScenarioKind.TWOD_CENTER:
            return _twod_trial(spec, trial, rng)
        if spec.config == ScenarioKind.POSE_STUDY:
            return _pose_trial(spec, trial, rng)
        return _accuracy_trial(spec, trial, rng)
    except CircleCalError as e:
        logger.warning(f"试验 {trial} 整体失败: {e}")
        return _failed(trial, methods)


# ============ 汇总 ============

def records_to_frame(records: Sequence[TrialRecord]) -> pd.DataFrame:
    return pd.DataFrame([r.to_row() for r in records], columns=CSV_COLUMNS)


def summarize(frame: pd.DataFrame) -> Dict[str, Any]:
    """每个方法、每个误差列的 mean / std（总体）/ median / iqr，只统计有限值"""
    summary: Dict[str, Any] = {}
    for method, group in frame.groupby("method", sort=False):
        entry: Dict[str, Any] = {
            "trials": int(len(group)),
            "failed": int(group["failed"].sum()),
        }
        for col in ERROR_COLUMNS:
            values = group[col].to_numpy(dtype=float)
            values = values[np.isfinite(values)]
            if len(values) == 0:
                continue
            q25, q75 = np.percentile(values, [25, 75])
            entry[col] = {
                "mean": float(values.mean()),
                "std": float(values.std()),
                "median": float(np.median(values)),
                "iqr": float(q75 - q25),
            }
        summary[str(method)] = entry
    return summary


def run_benchmark(spec: ScenarioSpec, out_dir: Optional[str] = None, workers: int = 1) -> BenchmarkResult:
    """
    执行场景的全部试验，计算误差并汇总；单次失败记入 failed 列，不中断整个扫描

    Args:
        spec: 场景
        out_dir: 结果目录，给出时写 results.csv 与 summary.json
        workers: 并行进程数；试验种子与顺序无关，结果与串行一致

    Returns:
        BenchmarkResult
    """
    logger.info(f"开始基准: {spec.config.value}, trials={spec.trials}, sigma={spec.sigma}, seed={spec.seed}")
    records: List[TrialRecord] = []
    step = max(1, spec.trials // 10)

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, trial_records in enumerate(pool.map(partial(run_trial, spec), range(spec.trials))):
                records.extend(trial_records)
                if (i + 1) % step == 0:
                    logger.info(f"进度: {i + 1}/{spec.trials}")
    else:
        for trial in range(spec.trials):
            records.extend(run_trial(spec, trial))
            if (trial + 1) % step == 0:
                logger.info(f"进度: {trial + 1}/{spec.trials}")

    frame = records_to_frame(records)
    summary = summarize(frame)
    failed = int(frame["failed"].sum())
    if failed:
        logger.warning(f"共有 {failed} 条方法结果失败")

    if out_dir:
        from result_storage import save_benchmark
        save_benchmark(frame, summary, out_dir)
    logger.info(f"基准完成: {spec.config.value}, {len(frame)} 行")
    return BenchmarkResult(records=records, frame=frame, summary=summary)


def run_outlier_sweep(spec: ScenarioSpec, out_dir: Optional[str] = None,
                      workers: int = 1) -> Dict[float, BenchmarkResult]:
    """
    离群比例扫描：对 extra["levels"] 中的每个 p 各跑 spec.trials 次试验

    各比例使用同一个种子，真值圆逐次试验一一对应。给出 out_dir 时每个比例写到
    p_0.10/ 这样的子目录，另在 out_dir 写 sweep.json（以 p 为键的汇总）

    Returns:
        {p: BenchmarkResult}，按 levels 的顺序
    """
    if spec.config != ScenarioKind.OUTLIER_TEST:
        raise InputError(f"离群比例扫描只适用于 outlier_test，实际 {spec.config.value}")
    levels = [float(p) for p in spec.extra.get("levels") or (spec.extra["p"],)]

    results: Dict[float, BenchmarkResult] = {}
    for p in levels:
        level_spec = replace(spec, extra={**spec.extra, "p": p})
        level_dir = os.path.join(out_dir, f"p_{p:.2f}") if out_dir else None
        results[p] = run_benchmark(level_spec, out_dir=level_dir, workers=workers)
        cga = results[p].summary.get("cga", {}).get("e_center_m", {})
        logger.info(f"p={p:.2f}: cga 平均圆心误差 {cga.get('mean', float('nan')):.4g}")

    if out_dir:
        from result_storage import write_json
        write_json(sweep_summary(results), os.path.join(out_dir, "sweep.json"))
    return results


def sweep_summary(results: Dict[float, BenchmarkResult]) -> Dict[str, Any]:
    return {f"{p:.2f}": result.summary for p, result in results.items()}
