"""
外参估计（PnP）
线性初始化 + 阻尼最小二乘细化重投影误差；标准 PnP-RANSAC；
以及每个三维点带两个二维候选的成对准 RANSAC
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import cv2
import numpy as np
from scipy.spatial.transform import Rotation

from config.estimation import (
    LM_GRADIENT_TOLERANCE,
    LM_INITIAL_DAMPING,
    LM_MAX_ITERATIONS,
    PLANAR_SINGULAR_RATIO,
    PNP_MIN_SAMPLE,
)
from estimation.robust import RansacConfig, run_ransac
from geometry.core import Intrinsics, RigidTransform, as_vec3, orthonormalize, skew
from utils.errors import (
    DegenerateConfigurationError,
    InputError,
    InsufficientPointsError,
    ProjectionError,
)
from utils.logger import get_module_logger

logger = get_module_logger("pnp")


@dataclass(frozen=True, eq=False)
class Correspondence:
    """三维点（LiDAR 坐标系，米）与其二维像素观测"""
    p3d: np.ndarray
    q2d: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p3d", as_vec3(self.p3d, "p3d"))
        q = np.asarray(self.q2d, dtype=float).reshape(-1)
        if q.shape != (2,) or not np.all(np.isfinite(q)):
            raise InputError(f"q2d 必须是 2 个有限实数，实际: {self.q2d}")
        object.__setattr__(self, "q2d", q)


@dataclass(frozen=True, eq=False)
class AmbiguousCorrespondence:
    """三维点与两个二维候选（退化情形下两个候选相同）"""
    p3d: np.ndarray
    hypotheses: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p3d", as_vec3(self.p3d, "p3d"))
        h = np.asarray(self.hypotheses, dtype=float)
        if h.shape != (2, 2) or not np.all(np.isfinite(h)):
            raise InputError(f"hypotheses 形状必须为 (2, 2)，实际: {h.shape}")
        object.__setattr__(self, "hypotheses", h)

    @classmethod
    def degenerate(cls, p3d, q2d) -> "AmbiguousCorrespondence":
        q = np.asarray(q2d, dtype=float).reshape(2)
        return cls(p3d, np.stack([q, q]))

    @classmethod
    def from_pair(cls, p3d, pair) -> "AmbiguousCorrespondence":
        """由 CenterHypothesisPair 构造"""
        return cls(p3d, np.stack([pair.c_a, pair.c_b]))


@dataclass
class PoseEstimate:
    """
    Args:
        transform: T_L^C
        mean_reproj_error: 内点的平均重投影误差（像素）
        inlier_mask: 内点掩码
        selection: 成对求解时每个点选中的候选下标（0/1）
        cost_history: 细化过程中每次接受步后的目标值
    """
    transform: RigidTransform
    mean_reproj_error: float
    inlier_mask: np.ndarray
    selection: Optional[np.ndarray] = None
    cost_history: List[float] = field(default_factory=list)


def _arrays(correspondences: Sequence[Correspondence]) -> Tuple[np.ndarray, np.ndarray]:
    points = np.array([c.p3d for c in correspondences], dtype=float).reshape(-1, 3)
    pixels = np.array([c.q2d for c in correspondences], dtype=float).reshape(-1, 2)
    return points, pixels


def _project_unchecked(pose: RigidTransform, points: np.ndarray, k: Intrinsics) -> Tuple[np.ndarray, np.ndarray]:
    pc = pose.apply(points)
    z = pc[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = np.column_stack([k.fx * pc[:, 0] / z + k.cx, k.fy * pc[:, 1] / z + k.cy])
    return uv, z


def point_errors(pose: RigidTransform, points: np.ndarray, pixels: np.ndarray, k: Intrinsics) -> np.ndarray:
    """逐点重投影误差（像素）；相机后方的点为 inf"""
    uv, z = _project_unchecked(pose, points, k)
    err = np.linalg.norm(uv - pixels, axis=1)
    err[~(z > 0)] = np.inf
    return err


def mean_reprojection_error(pose: RigidTransform, points, pixels, k: Intrinsics) -> float:
    return float(point_errors(pose, np.asarray(points, dtype=float), np.asarray(pixels, dtype=float), k).mean())


def reprojection_residuals(pose: RigidTransform, points, pixels, k: Intrinsics) -> np.ndarray:
    """
    π(T p) - q，按 [du0, dv0, du1, dv1, ...] 展开

    Raises:
        ProjectionError: 有点位于相机后方
    """
    uv, z = _project_unchecked(pose, np.asarray(points, dtype=float), k)
    if np.any(z <= 0):
        raise ProjectionError(f"{int((z <= 0).sum())} 个点位于相机后方")
    return (uv - np.asarray(pixels, dtype=float)).ravel()


def reprojection_jacobian(pose: RigidTransform, points, k: Intrinsics) -> np.ndarray:
    """
    残差对 [ω, t] 的解析雅可比 (2N, 6)

    旋转用左扰动 R ← exp(ω) R，于是 ∂Xc/∂ω = -[R X]×，∂Xc/∂t = I
    """
    p = np.asarray(points, dtype=float)
    rotated = p @ pose.rotation.T
    pc = rotated + pose.translation
    x, y, z = pc[:, 0], pc[:, 1], pc[:, 2]
    n = len(p)

    d_proj = np.zeros((n, 2, 3))
    d_proj[:, 0, 0] = k.fx / z
    d_proj[:, 0, 2] = -k.fx * x / (z * z)
    d_proj[:, 1, 1] = k.fy / z
    d_proj[:, 1, 2] = -k.fy * y / (z * z)

    d_pc = np.zeros((n, 3, 6))
    d_pc[:, :, :3] = -np.array([skew(r) for r in rotated])
    d_pc[:, :, 3:] = np.eye(3)
    return np.einsum("nij,njk->nik", d_proj, d_pc).reshape(2 * n, 6)


def _perturb(pose: RigidTransform, delta: np.ndarray) -> RigidTransform:
    rot = Rotation.from_rotvec(delta[:3]).as_matrix() @ pose.rotation
    return RigidTransform(orthonormalize(rot), pose.translation + delta[3:])


def refine_pose(
    pose: RigidTransform,
    points,
    pixels,
    k: Intrinsics,
    max_iterations: int = LM_MAX_ITERATIONS,
    gradient_tolerance: float = LM_GRADIENT_TOLERANCE,
) -> Tuple[RigidTransform, List[float]]:
    """
    阻尼最小二乘（Levenberg-Marquardt）细化 Σ‖q - π(T p)‖²

    Returns:
        (细化后的位姿, 每次接受步后的目标值列表，首元素为初值目标)

    Raises:
        ProjectionError: 初始位姿下有点位于相机后方
    """
    p = np.asarray(points, dtype=float)
    q = np.asarray(pixels, dtype=float)
    residual = reprojection_residuals(pose, p, q, k)
    cost = float(residual @ residual)
    costs = [cost]
    damping = LM_INITIAL_DAMPING

    for _ in range(max_iterations):
        jac = reprojection_jacobian(pose, p, k)
        grad = jac.T @ residual
        if np.abs(grad).max() < gradient_tolerance:
            break
        hessian = jac.T @ jac
        diag = np.maximum(np.diag(hessian), 1e-12)
        try:
            delta = np.linalg.solve(hessian + damping * np.diag(diag), -grad)
        except np.linalg.LinAlgError:
            damping *= 10.0
            continue
        candidate = _perturb(pose, delta)
        try:
            new_residual = reprojection_residuals(candidate, p, q, k)
            new_cost = float(new_residual @ new_residual)
        except ProjectionError:
            new_cost = np.inf
        if new_cost < cost:
            pose, residual, cost = candidate, new_residual, new_cost
            costs.append(cost)
            damping = max(damping / 10.0, 1e-15)
            if np.linalg.norm(delta) < 1e-14 * (1.0 + np.linalg.norm(pose.translation)):
                break
        else:
            damping *= 10.0
            if damping > 1e16:
                break

    logger.debug(f"位姿细化: 目标 {costs[0]:.4g} -> {costs[-1]:.4g}，接受 {len(costs) - 1} 步")
    return pose, costs


def _is_planar(points: np.ndarray) -> bool:
    s = np.linalg.svd(points - points.mean(axis=0), compute_uv=False)
    return s[2] < PLANAR_SINGULAR_RATIO * s[0]


def _normalize_2d(points: np.ndarray) -> np.ndarray:
    mean = points.mean(axis=0)
    dist = np.linalg.norm(points - mean, axis=1).mean()
    s = np.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array([[s, 0.0, -s * mean[0]], [0.0, s, -s * mean[1]], [0.0, 0.0, 1.0]])


def _normalize_3d(points: np.ndarray) -> np.ndarray:
    mean = points.mean(axis=0)
    dist = np.linalg.norm(points - mean, axis=1).mean()
    s = np.sqrt(3.0) / dist if dist > 0 else 1.0
    t = np.eye(4) * s
    t[3, 3] = 1.0
    t[:3, 3] = -s * mean
    return t


def _homography_init(points: np.ndarray, rays: np.ndarray, pixels: np.ndarray, k: Intrinsics) -> RigidTransform:
    """共面三维点：平面坐标到归一化像平面的单应分解，两个符号解按正深度与重投影误差取舍"""
    mu = points.mean(axis=0)
    _, s, basis = np.linalg.svd(points - mu)
    if s[1] < 1e-9 * s[0]:
        raise DegenerateConfigurationError("三维点共线，无法估计位姿")
    if np.linalg.det(basis) < 0:
        basis[2] = -basis[2]
    local = (points - mu) @ basis.T

    src = np.column_stack([local[:, :2], np.ones(len(points))])
    t_src = _normalize_2d(local[:, :2])
    t_dst = _normalize_2d(rays[:, :2])
    a = src @ t_src.T
    b = rays @ t_dst.T
    rows = []
    for (x, y, w), (u, v, _) in zip(a, b):
        rows.append([x, y, w, 0.0, 0.0, 0.0, -u * x, -u * y, -u * w])
        rows.append([0.0, 0.0, 0.0, x, y, w, -v * x, -v * y, -v * w])
    _, sv, vt = np.linalg.svd(np.array(rows))
    h = np.linalg.inv(t_dst) @ vt[-1].reshape(3, 3) @ t_src

    scale = 2.0 / (np.linalg.norm(h[:, 0]) + np.linalg.norm(h[:, 1]))
    best = None
    for sign in (1.0, -1.0):
        r1 = sign * scale * h[:, 0]
        r2 = sign * scale * h[:, 1]
        r_h = orthonormalize(np.column_stack([r1, r2, np.cross(r1, r2)]))
        t_h = sign * scale * h[:, 2]
        pose = RigidTransform(orthonormalize(r_h @ basis), t_h - r_h @ basis @ mu)
        err = point_errors(pose, points, pixels, k)
        if not np.all(np.isfinite(err)):
            continue
        if best is None or err.mean() < best[0]:
            best = (err.mean(), pose)
    if best is None:
        raise DegenerateConfigurationError("单应分解的两个解都不满足正深度")
    return best[1]


def _dlt_init(points: np.ndarray, rays: np.ndarray) -> RigidTransform:
    """非共面三维点（N ≥ 6）的直接线性变换"""
    t3 = _normalize_3d(points)
    t2 = _normalize_2d(rays[:, :2])
    xh = np.column_stack([points, np.ones(len(points))]) @ t3.T
    mh = rays @ t2.T
    rows = []
    for X, (u, v, w) in zip(xh, mh):
        rows.append(np.concatenate([w * X, np.zeros(4), -u * X]))
        rows.append(np.concatenate([np.zeros(4), w * X, -v * X]))
    design = np.array(rows)
    _, sv, vt = np.linalg.svd(design)
    if sv[-2] < 1e-12 * sv[0]:
        raise DegenerateConfigurationError("DLT 设计矩阵秩亏")
    p = np.linalg.inv(t2) @ vt[-1].reshape(3, 4) @ t3
    m = p[:, :3]
    if np.linalg.det(m) < 0:
        p = -p
        m = -m
    u, s, vt_m = np.linalg.svd(m)
    rot = u @ vt_m
    return RigidTransform(orthonormalize(rot), p[:, 3] / s.mean())


def _opencv_init(points: np.ndarray, pixels: np.ndarray, k: Intrinsics) -> RigidTransform:
    """4 点用 AP3P，5 点用 EPnP"""
    flag = cv2.SOLVEPNP_AP3P if len(points) == 4 else cv2.SOLVEPNP_EPNP
    try:
        ok, rvec, tvec = cv2.solvePnP(
            points.astype(np.float64), pixels.astype(np.float64), k.K, None, flags=flag
        )
    except cv2.error as e:
        raise DegenerateConfigurationError(f"OpenCV 最小 PnP 求解失败: {e}") from e
    if not ok:
        raise DegenerateConfigurationError("OpenCV 最小 PnP 无解")
    return RigidTransform.from_rotvec(np.asarray(rvec).ravel(), np.asarray(tvec).ravel())


def initial_pose(points: np.ndarray, pixels: np.ndarray, k: Intrinsics) -> RigidTransform:
    """线性初始化：共面走单应分解，否则 DLT（点数不足 6 时用 OpenCV 最小解）"""
    if len(points) < PNP_MIN_SAMPLE:
        raise InsufficientPointsError(f"PnP 至少需要 {PNP_MIN_SAMPLE} 个对应点，实际 {len(points)}")
    rays = np.column_stack([pixels, np.ones(len(pixels))]) @ k.K_inv.T
    if _is_planar(points):
        return _homography_init(points, rays, pixels, k)
    if len(points) >= 6:
        return _dlt_init(points, rays)
    return _opencv_init(points, pixels, k)


def _solve_arrays(points: np.ndarray, pixels: np.ndarray, k: Intrinsics) -> Tuple[RigidTransform, List[float]]:
    pose = initial_pose(points, pixels, k)
    return refine_pose(pose, points, pixels, k)


def solve_pnp(correspondences: Sequence[Correspondence], k: Intrinsics) -> PoseEstimate:
    """
    最小化重投影误差的 PnP

    Raises:
        InsufficientPointsError: 少于 4 个对应点
        DegenerateConfigurationError: 线性初始化秩亏
    """
    points, pixels = _arrays(correspondences)
    pose, costs = _solve_arrays(points, pixels, k)
    err = point_errors(pose, points, pixels, k)
    logger.info(f"PnP 完成: N={len(points)}, 平均重投影误差 {err.mean():.4f} px")
    return PoseEstimate(
        transform=pose,
        mean_reproj_error=float(err.mean()),
        inlier_mask=np.ones(len(points), dtype=bool),
        cost_history=costs,
    )


def _hypothesis_errors(pose: RigidTransform, points: np.ndarray, hyps: np.ndarray, k: Intrinsics) -> np.ndarray:
    """(N, 2)：每个点两个候选的重投影误差"""
    return np.column_stack([point_errors(pose, points, hyps[:, j], k) for j in range(2)])


def solve_pnp_paired(ambiguous: Sequence[AmbiguousCorrespondence], k: Intrinsics,
                     cfg: RansacConfig) -> PoseEstimate:
    """
    成对准 RANSAC：每次迭代随机取 4 个点，并为每个点随机选一个二维候选；
    打分时每个点取两个候选中误差较小者；最终按最优位姿为每个内点选候选后细化

    Args:
        ambiguous: 带两个候选的对应
        k: 相机内参
        cfg: RANSAC 参数，inlier_threshold 单位为像素

    Raises:
        InsufficientPointsError: 少于 4 个对应
        NoConsensusError: 没有达到 cfg.min_sample 个内点的假设
    """
    if len(ambiguous) < PNP_MIN_SAMPLE:
        raise InsufficientPointsError(f"PnP 至少需要 {PNP_MIN_SAMPLE} 个对应点，实际 {len(ambiguous)}")
    points = np.array([a.p3d for a in ambiguous])
    hyps = np.array([a.hypotheses for a in ambiguous])
    index = np.arange(len(points))

    def fit_sample(idx: np.ndarray, rng: np.random.Generator) -> RigidTransform:
        choice = rng.integers(0, 2, size=len(idx))
        pose, _ = _solve_arrays(points[idx], hyps[idx, choice], k)
        return pose

    def residual_fn(pose: RigidTransform) -> np.ndarray:
        return _hypothesis_errors(pose, points, hyps, k).min(axis=1)

    def refit(mask: np.ndarray, pose: RigidTransform) -> RigidTransform:
        selection = _hypothesis_errors(pose, points, hyps, k).argmin(axis=1)
        refined, _ = refine_pose(pose, points[mask], hyps[index[mask], selection[mask]], k)
        return refined

    def accept_refit(new, old) -> bool:
        # 内点不减少且平均误差不增加
        return new.count > old.count or (new.count == old.count and new.mean <= old.mean)

    report = run_ransac(
        n_data=len(points),
        cfg=cfg,
        sample_size=PNP_MIN_SAMPLE,
        fit_sample=fit_sample,
        residual_fn=residual_fn,
        refit=refit,
        accept_refit=accept_refit,
        label="pnp-paired",
    )
    pose = report.best_model
    selection = _hypothesis_errors(pose, points, hyps, k).argmin(axis=1)
    return PoseEstimate(
        transform=pose,
        mean_reproj_error=report.mean_residual,
        inlier_mask=report.inlier_mask,
        selection=selection,
    )


def solve_pnp_ransac(correspondences: Sequence[Correspondence], k: Intrinsics,
                     cfg: RansacConfig) -> PoseEstimate:
    """标准 PnP-RANSAC：等价于两个候选相同的成对求解"""
    ambiguous = [AmbiguousCorrespondence.degenerate(c.p3d, c.q2d) for c in correspondences]
    estimate = solve_pnp_paired(ambiguous, k, cfg)
    estimate.selection = None
    return estimate
