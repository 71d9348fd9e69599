"""
鲁棒估计
通用 RANSAC 引擎、CGA-RANSAC 圆估计器，以及作为对照的解耦基线（先拟合平面，再做二维圆拟合）
"""

from dataclasses import dataclass
from typing import Any, Callable, Optional

import numpy as np

from config.estimation import CIRCLE_MIN_SAMPLE, DECOUPLED_MIN_SAMPLE
from geometry.cga import circle_distance2, fit_circle_cga
from geometry.core import Circle3D, as_points, canonical_normal
from utils.errors import (
    DegenerateConfigurationError,
    EstimationError,
    InputError,
    InsufficientPointsError,
    NoConsensusError,
    NonCircleSolutionError,
)
from utils.logger import get_module_logger

logger = get_module_logger("robust")


@dataclass
class RansacConfig:
    """
    RANSAC 参数

    Args:
        max_iterations: 最大迭代次数（不做提前退出）
        inlier_threshold: 内点阈值；圆模型为平方距离，PnP 为像素
        min_sample: 一致集最少内点数（圆模型同时也是最小样本量，且 ≥ 5）
        seed: 随机种子
    """
    max_iterations: int = 1000
    inlier_threshold: float = 0.05 ** 2
    min_sample: int = CIRCLE_MIN_SAMPLE
    seed: int = 0

    def __post_init__(self):
        if int(self.max_iterations) < 1:
            raise InputError(f"max_iterations 必须 ≥ 1，实际 {self.max_iterations}")
        if not self.inlier_threshold > 0:
            raise InputError(f"inlier_threshold 必须为正，实际 {self.inlier_threshold}")
        if int(self.min_sample) < 1:
            raise InputError(f"min_sample 必须 ≥ 1，实际 {self.min_sample}")
        self.max_iterations = int(self.max_iterations)
        self.min_sample = int(self.min_sample)
        self.seed = int(self.seed)


@dataclass
class RansacReport:
    """RANSAC 结果；best_model 对圆估计器是 Circle3D，对 PnP 是位姿"""
    best_model: Any
    inlier_mask: np.ndarray
    iterations_run: int
    inlier_count: int
    mean_residual: float = 0.0
    skipped_samples: int = 0
    refit_accepted: bool = False
    # 采样阶段选中假设的内点数；重拟合被采用时 inlier_count 按重拟合模型重新统计
    consensus_count: int = 0


@dataclass
class _Candidate:
    model: Any
    mask: np.ndarray
    count: int
    mean: float
    iteration: int


def _evaluate(model, residual_fn, threshold: float, iteration: int) -> _Candidate:
    res = residual_fn(model)
    mask = np.asarray(res <= threshold)
    count = int(mask.sum())
    mean = float(res[mask].mean()) if count else float("inf")
    return _Candidate(model, mask, count, mean, iteration)


def _better(a: _Candidate, b: Optional[_Candidate]) -> bool:
    """内点更多者优先；相同则平均残差更小；再相同则迭代序号更小者优先"""
    if b is None:
        return True
    if a.count != b.count:
        return a.count > b.count
    if a.mean != b.mean:
        return a.mean < b.mean
    return a.iteration < b.iteration


def run_ransac(
    n_data: int,
    cfg: RansacConfig,
    sample_size: int,
    fit_sample: Callable[[np.ndarray, np.random.Generator], Any],
    residual_fn: Callable[[Any], np.ndarray],
    refit: Optional[Callable[[np.ndarray, Any], Any]] = None,
    accept_refit: Optional[Callable[[_Candidate, _Candidate], bool]] = None,
    label: str = "ransac",
) -> RansacReport:
    """
    通用 RANSAC 循环

    Args:
        n_data: 数据个数
        cfg: RANSAC 参数
        sample_size: 最小样本量
        fit_sample: (样本下标, rng) -> 模型；失败时抛 EstimationError，跳过但计入迭代次数
        residual_fn: 模型 -> (n_data,) 残差，与 cfg.inlier_threshold 同单位
        refit: (内点掩码, 采样最优模型) -> 模型，用于最终重拟合
        accept_refit: (重拟合候选, 采样最优候选) -> 是否采用重拟合；默认内点数不减少即采用
        label: 日志标签

    Returns:
        RansacReport

    Raises:
        NoConsensusError: 没有任何假设达到 cfg.min_sample 个内点
    """
    if n_data < sample_size:
        raise InsufficientPointsError(f"{label}: 数据量 {n_data} 少于最小样本量 {sample_size}")

    rng = np.random.default_rng(cfg.seed)
    best: Optional[_Candidate] = None
    skipped = 0

    for iteration in range(cfg.max_iterations):
        sample = rng.choice(n_data, size=sample_size, replace=False)
        try:
            model = fit_sample(sample, rng)
        except EstimationError as e:
            skipped += 1
            logger.debug(f"{label}: 第 {iteration} 次采样退化，跳过 ({e})")
            continue
        candidate = _evaluate(model, residual_fn, cfg.inlier_threshold, iteration)
        if _better(candidate, best):
            best = candidate

    if best is None or best.count < cfg.min_sample:
        found = 0 if best is None else best.count
        raise NoConsensusError(
            f"{label}: {cfg.max_iterations} 次迭代后最大一致集只有 {found} 个内点 "
            f"(至少需要 {cfg.min_sample})"
        )

    consensus_count = best.count
    refit_accepted = False
    if refit is not None:
        try:
            refitted = _evaluate(refit(best.mask, best.model), residual_fn, cfg.inlier_threshold, best.iteration)
            accept = accept_refit or (lambda new, old: new.count >= old.count)
            if accept(refitted, best):
                best = refitted
                refit_accepted = True
            else:
                logger.debug(f"{label}: 重拟合结果变差 ({refitted.count} < {best.count})，保留采样模型")
        except EstimationError as e:
            logger.warning(f"{label}: 内点重拟合失败，保留采样模型 ({e})")

    if skipped > cfg.max_iterations // 2:
        logger.warning(f"{label}: 超过一半的采样退化 ({skipped}/{cfg.max_iterations})")
    logger.info(
        f"{label}: 完成 {cfg.max_iterations} 次迭代, 内点 {best.count}/{n_data}, "
        f"平均残差 {best.mean:.4g}, 跳过 {skipped}"
    )
    return RansacReport(
        best_model=best.model,
        inlier_mask=best.mask,
        iterations_run=cfg.max_iterations,
        inlier_count=best.count,
        mean_residual=best.mean,
        skipped_samples=skipped,
        refit_accepted=refit_accepted,
        consensus_count=consensus_count,
    )


def ransac_fit_circle(points, cfg: RansacConfig) -> RansacReport:
    """
    CGA-RANSAC：每次采样 5 个点做闭式拟合，用近似平方距离打分，最后用全部内点重拟合

    重拟合在采样一致集上的平均残差不大于采样模型时采用，内点按重拟合模型重新统计；
    采样阶段的最大一致集大小记在 consensus_count

    Args:
        points: (N, 3) 点集
        cfg: RANSAC 参数，inlier_threshold 为平方距离（m²）

    Returns:
        RansacReport，best_model 为 Circle3D
    """
    p = as_points(points)
    sample_size = max(cfg.min_sample, CIRCLE_MIN_SAMPLE)
    if len(p) < sample_size:
        raise InsufficientPointsError(f"CGA-RANSAC 至少需要 {sample_size} 个点，实际 {len(p)}")
    return run_ransac(
        n_data=len(p),
        cfg=cfg,
        sample_size=sample_size,
        fit_sample=lambda idx, rng: fit_circle_cga(p[idx]).circle,
        residual_fn=lambda circle: circle_distance2(p, circle),
        refit=lambda mask, model: fit_circle_cga(p[mask]).circle,
        accept_refit=lambda new, old: (
            new.count >= cfg.min_sample
            and float(circle_distance2(p[old.mask], new.model).mean()) <= old.mean
        ),
        label="cga-ransac",
    )


def fit_plane(points) -> tuple:
    """
    总体最小二乘平面：中心化点集最小奇异值对应的右奇异向量

    Returns:
        (质心, 单位法向量, 平面内基 u, 平面内基 v, 奇异值)
    """
    p = as_points(points)
    mu = p.mean(axis=0)
    _, s, vt = np.linalg.svd(p - mu, full_matrices=False)
    if len(s) < 2 or s[1] < 1e-12 * s[0]:
        raise DegenerateConfigurationError("点集共线（或重合），无法确定平面")
    return mu, vt[2], vt[0], vt[1], s


def fit_circle_decoupled(points) -> Circle3D:
    """
    解耦基线：SVD 平面 → 投影到平面 → Kåsa 代数圆拟合 → 提升回三维

    Raises:
        InsufficientPointsError: 少于 3 个点
        DegenerateConfigurationError: 点集共线
    """
    p = as_points(points)
    if len(p) < DECOUPLED_MIN_SAMPLE:
        raise InsufficientPointsError(f"解耦拟合至少需要 {DECOUPLED_MIN_SAMPLE} 个点，实际 {len(p)}")
    mu, normal, u, v, _ = fit_plane(p)
    local = p - mu
    x = local @ u
    y = local @ v
    design = np.column_stack([2.0 * x, 2.0 * y, np.ones(len(p))])
    (a, b, c), *_ = np.linalg.lstsq(design, x * x + y * y, rcond=None)
    r2 = c + a * a + b * b
    if not np.isfinite(r2) or r2 <= 0:
        raise NonCircleSolutionError(f"Kåsa 拟合得到的 r² 非正: {r2:.6g}")
    return Circle3D(mu + a * u + b * v, canonical_normal(normal), float(np.sqrt(r2)))


def point_circle_euclidean2(points, circle: Circle3D) -> np.ndarray:
    """点到圆的欧氏平方距离 h² + (ρ - r)²（h 为到平面距离，ρ 为面内径向距离）"""
    d = as_points(points) - circle.center
    h = d @ circle.normal
    radial = np.linalg.norm(d - np.outer(h, circle.normal), axis=1)
    return h * h + (radial - circle.radius) ** 2


def ransac_fit_circle_decoupled(points, cfg: RansacConfig, refit: bool = False) -> RansacReport:
    """
    解耦基线的 RANSAC 包装：三点外接圆作为最小模型，欧氏点到圆距离打分

    与 ransac_fit_circle 共用循环、阈值和一致集下限。默认和 PCL 的 SAC 分割一样
    直接返回一致集最大的三点模型；refit=True 时再用全部内点做一次解耦拟合

    Args:
        points: (N, 3) 点集
        cfg: RANSAC 参数
        refit: 是否用内点重拟合
    """
    p = as_points(points)
    if len(p) < max(DECOUPLED_MIN_SAMPLE, cfg.min_sample):
        raise InsufficientPointsError(
            f"解耦 RANSAC 至少需要 {max(DECOUPLED_MIN_SAMPLE, cfg.min_sample)} 个点，实际 {len(p)}"
        )
    return run_ransac(
        n_data=len(p),
        cfg=cfg,
        sample_size=DECOUPLED_MIN_SAMPLE,
        fit_sample=lambda idx, rng: fit_circle_decoupled(p[idx]),
        residual_fn=lambda circle: point_circle_euclidean2(p, circle),
        refit=(lambda mask, model: fit_circle_decoupled(p[mask])) if refit else None,
        label="decoupled-ransac",
    )
