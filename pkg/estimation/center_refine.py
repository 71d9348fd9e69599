"""
二维圆心投影修正
透视投影下椭圆几何中心并不是三维圆心的投影。
对候选点 c，沿若干方向作过 c 的弦，由弦端点视线与 c 的视线夹角恢复相机到圆心的距离 dᵢ；
在真实投影中心处所有 dᵢ 相等，因此用 dᵢ 的方差作损失，在椭圆内部网格搜索。
损失有两个局部极小值，用共面第二个圆的半径比消除歧义。
"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy import ndimage

from config.estimation import (
    CHORD_DENOMINATOR_MIN,
    CHORD_N_DIRS,
    GRID_STEP_PX,
    LOSS_FIELD_CHUNK,
    NMS_RADIUS_FLOOR_PX,
    NMS_RADIUS_MINOR_FRACTION,
    SUBPIXEL_REFINEMENT,
)
from geometry.core import Intrinsics, backproject_rays
from geometry.ellipse import (
    Conic,
    bounding_box,
    conic_to_params,
    line_conic_roots,
    transform_conic,
)
from utils.errors import (
    DegenerateChordError,
    DisambiguationError,
    EmptyRegionError,
    EstimationError,
    InputError,
    InvalidCandidateError,
)
from utils.logger import get_module_logger

logger = get_module_logger("center_refine")


@dataclass
class SearchConfig:
    """网格搜索参数"""
    n_dirs: int = CHORD_N_DIRS
    grid_step: float = GRID_STEP_PX
    nms_radius_floor: float = NMS_RADIUS_FLOOR_PX
    nms_minor_fraction: float = NMS_RADIUS_MINOR_FRACTION
    subpixel: bool = SUBPIXEL_REFINEMENT
    chunk: int = LOSS_FIELD_CHUNK

    def __post_init__(self):
        if self.n_dirs < 2:
            raise InputError(f"n_dirs 至少为 2，实际 {self.n_dirs}")
        if not self.grid_step > 0:
            raise InputError(f"grid_step 必须为正，实际 {self.grid_step}")


@dataclass
class ChordLossField:
    """
    损失场：values[i, j] 对应像素 origin + step·(j, i)，椭圆外为 NaN
    """
    origin: np.ndarray
    step: float
    values: np.ndarray
    n_dirs: int
    normalized: bool = False

    def pixel(self, row: float, col: float) -> np.ndarray:
        return self.origin + self.step * np.array([col, row])

    def to_frame(self) -> pd.DataFrame:
        """导出为 (u, v, loss) 长表，只保留椭圆内部的格点"""
        rows, cols = np.nonzero(np.isfinite(self.values))
        return pd.DataFrame({
            "u": self.origin[0] + self.step * cols,
            "v": self.origin[1] + self.step * rows,
            "loss": self.values[rows, cols],
        })


@dataclass
class CenterHypothesisPair:
    """
    损失场的两个最低局部极小值，loss_a ≤ loss_b

    single=True 表示只有一个极小值（例如正对相机），此时 c_b 与 c_a 相同
    """
    c_a: np.ndarray
    c_b: np.ndarray
    loss_a: float
    loss_b: float
    distance_a: float
    distance_b: float
    single: bool = False
    loss_field: Optional[ChordLossField] = field(default=None, repr=False)

    @property
    def hypotheses(self) -> List[np.ndarray]:
        return [self.c_a] if self.single else [self.c_a, self.c_b]


@dataclass
class RectifyingHomography:
    """h 已包含仿射预变换 T，直接作用于原始像素"""
    h: np.ndarray
    candidate: np.ndarray

    def apply(self, pixels) -> np.ndarray:
        p = np.atleast_2d(np.asarray(pixels, dtype=float))
        mapped = np.column_stack([p, np.ones(len(p))]) @ self.h.T
        return mapped[:, :2] / mapped[:, 2:3]

    def rectify(self, conic: Conic) -> Conic:
        return transform_conic(conic, self.h)


def _ray_angles(rays: np.ndarray, center_rays: np.ndarray) -> np.ndarray:
    """单位向量夹角，用 atan2 避免 acos 在小角度处的精度损失"""
    cross = np.linalg.norm(np.cross(rays, center_rays), axis=-1)
    dot = np.sum(rays * center_rays, axis=-1)
    return np.arctan2(cross, dot)


def _directions(n_dirs: int) -> np.ndarray:
    gammas = np.arange(n_dirs) * math.pi / n_dirs
    return np.column_stack([np.cos(gammas), np.sin(gammas)])


def _chord_distances(conic: Conic, candidates: np.ndarray, directions: np.ndarray,
                     radius: float, k: Intrinsics) -> np.ndarray:
    """
    批量计算 dᵢ，返回 (M, n)；候选点在椭圆外或分母过小的位置为 NaN

    d = r·sin(θ₁+θ₂) / √(sin²(θ₁−θ₂) + 4 sin²θ₁ sin²θ₂)，
    与余弦定理形式代数等价，但在小角度下没有抵消误差
    """
    m, n = len(candidates), len(directions)
    with np.errstate(invalid="ignore", divide="ignore"):
        t_minus, t_plus = line_conic_roots(conic, candidates, directions)
        ends_a = candidates[:, None, :] + t_minus[..., None] * directions[None, :, :]
        ends_b = candidates[:, None, :] + t_plus[..., None] * directions[None, :, :]
        rc = backproject_rays(candidates, k)[:, None, :]
        ra = backproject_rays(ends_a.reshape(-1, 2), k).reshape(m, n, 3)
        rb = backproject_rays(ends_b.reshape(-1, 2), k).reshape(m, n, 3)
        th1 = _ray_angles(ra, rc)
        th2 = _ray_angles(rb, rc)
        denom = np.sqrt(np.sin(th1 - th2) ** 2 + 4.0 * np.sin(th1) ** 2 * np.sin(th2) ** 2)
        d = radius * np.sin(th1 + th2) / denom
    d[~(denom >= CHORD_DENOMINATOR_MIN)] = np.nan
    return d


def _dispersion(distances: np.ndarray, normalized: bool) -> Tuple[np.ndarray, np.ndarray]:
    """每行的总体方差（归一化模式下再除以均值平方）以及均值；有效样本少于 2 时为 NaN"""
    valid = np.isfinite(distances).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        safe = np.where(valid[:, None] > 0, distances, 0.0)
        mean = np.nansum(safe, axis=1) / valid
        var = np.nansum((safe - mean[:, None]) ** 2 * np.isfinite(distances), axis=1) / valid
        if normalized:
            var = var / mean ** 2
    var[valid < 2] = np.nan
    mean[valid < 2] = np.nan
    return var, mean


def chord_distance(conic: Conic, candidate, gamma: float, radius: float, k: Intrinsics) -> float:
    """
    沿方向 gamma 过候选点的弦所恢复的相机到圆心距离

    Raises:
        InvalidCandidateError: 候选点不在椭圆内部
        DegenerateChordError: 分母小于 1e-12（掠射视角）
    """
    if not radius > 0:
        raise InputError(f"圆半径必须为正，实际 {radius}")
    c = np.asarray(candidate, dtype=float).reshape(1, 2)
    if not conic.contains(c)[0]:
        raise InvalidCandidateError(f"候选点 {c[0].tolist()} 不在椭圆内部")
    direction = np.array([[math.cos(gamma), math.sin(gamma)]])
    d = _chord_distances(conic, c, direction, radius, k)[0, 0]
    if not np.isfinite(d):
        raise DegenerateChordError(f"弦距离公式分母过小 (gamma={gamma:.4f})")
    return float(d)


def chord_loss(conic: Conic, candidate, radius: Optional[float], k: Intrinsics,
               n_dirs: int = CHORD_N_DIRS) -> float:
    """
    n_dirs 个方向 γᵢ = iπ/n 上 dᵢ 的总体方差

    radius 为 None 时取 r = 1 并返回方差 / 均值²（尺度无关）。
    分母退化的方向被丢弃；有效方向少于 2 个时报错。
    """
    if radius is not None and not radius > 0:
        raise InputError(f"圆半径必须为正，实际 {radius}")
    c = np.asarray(candidate, dtype=float).reshape(1, 2)
    if not conic.contains(c)[0]:
        raise InvalidCandidateError(f"候选点 {c[0].tolist()} 不在椭圆内部")
    d = _chord_distances(conic, c, _directions(n_dirs), 1.0 if radius is None else radius, k)
    var, _ = _dispersion(d, normalized=radius is None)
    if not np.isfinite(var[0]):
        raise DegenerateChordError(f"有效弦方向不足 2 个 (候选点 {c[0].tolist()})")
    return float(var[0])


def compute_loss_field(conic: Conic, radius: Optional[float], k: Intrinsics,
                       search_cfg: Optional[SearchConfig] = None) -> ChordLossField:
    """
    在椭圆包围盒上按 grid_step 网格计算损失，椭圆外为 NaN

    Raises:
        EmptyRegionError: 网格上没有落在椭圆内部的格点
    """
    cfg = search_cfg or SearchConfig()
    params = conic_to_params(conic)
    xmin, xmax, ymin, ymax = bounding_box(params)
    x0 = math.floor(xmin / cfg.grid_step) * cfg.grid_step
    y0 = math.floor(ymin / cfg.grid_step) * cfg.grid_step
    nx = int(math.ceil((xmax - x0) / cfg.grid_step)) + 1
    ny = int(math.ceil((ymax - y0) / cfg.grid_step)) + 1
    gx, gy = np.meshgrid(x0 + cfg.grid_step * np.arange(nx), y0 + cfg.grid_step * np.arange(ny))
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)

    values = np.full(len(grid), np.nan)
    inside = np.flatnonzero(conic.contains(grid))
    if len(inside) == 0:
        raise EmptyRegionError(f"椭圆内部没有网格点 (a={params.a:.3g}, b={params.b:.3g})")

    directions = _directions(cfg.n_dirs)
    r = 1.0 if radius is None else radius
    for start in range(0, len(inside), cfg.chunk):
        idx = inside[start:start + cfg.chunk]
        d = _chord_distances(conic, grid[idx], directions, r, k)
        values[idx], _ = _dispersion(d, normalized=radius is None)

    logger.debug(f"损失场: {ny}x{nx} 网格, 内部 {len(inside)} 点, n_dirs={cfg.n_dirs}")
    return ChordLossField(
        origin=np.array([x0, y0]),
        step=cfg.grid_step,
        values=values.reshape(ny, nx),
        n_dirs=cfg.n_dirs,
        normalized=radius is None,
    )


def _disk(radius_cells: float) -> np.ndarray:
    half = int(math.ceil(radius_cells))
    yy, xx = np.mgrid[-half:half + 1, -half:half + 1]
    return xx * xx + yy * yy <= radius_cells * radius_cells


def _subpixel_offset(prev: float, mid: float, nxt: float) -> float:
    """三点抛物线顶点偏移，截断到 ±0.5 格"""
    if not (np.isfinite(prev) and np.isfinite(nxt)):
        return 0.0
    curvature = prev - 2.0 * mid + nxt
    if curvature <= 0:
        return 0.0
    return float(np.clip(0.5 * (prev - nxt) / curvature, -0.5, 0.5))


def find_center_hypotheses(conic: Conic, radius: Optional[float], k: Intrinsics,
                           search_cfg: Optional[SearchConfig] = None) -> CenterHypothesisPair:
    """
    网格搜索 + 非极大值抑制，返回损失最低的两个局部极小值

    只在腐蚀 1 像素后的内部搜索极小值，避免边界格点上的弦退化；
    NMS 半径 ρ = max(3 px, 0.1·短半轴)

    Raises:
        EmptyRegionError: 椭圆内部没有可用格点
    """
    cfg = search_cfg or SearchConfig()
    conic.require_ellipse()
    loss_field = compute_loss_field(conic, radius, k, cfg)
    values = loss_field.values

    finite = np.isfinite(values)
    search = ndimage.binary_erosion(finite)
    if not search.any():
        search = finite
    if not search.any():
        raise EmptyRegionError("损失场没有有效格点")

    params = conic_to_params(conic)
    rho = max(cfg.nms_radius_floor, cfg.nms_minor_fraction * params.b)
    rho_cells = rho / cfg.grid_step
    masked = np.where(search, values, np.inf)
    local_min = ndimage.minimum_filter(masked, footprint=_disk(rho_cells), mode="constant", cval=np.inf)
    rows, cols = np.nonzero(search & (masked <= local_min))
    order = np.argsort(masked[rows, cols], kind="stable")

    # 贪心 NMS：按损失从小到大，与已选点距离超过 ρ 才保留
    picked: List[Tuple[int, int]] = []
    for i in order:
        r, c = rows[i], cols[i]
        if all((r - pr) ** 2 + (c - pc) ** 2 > rho_cells ** 2 for pr, pc in picked):
            picked.append((r, c))
        if len(picked) == 2:
            break

    centers = []
    for r, c in picked:
        dr = dc = 0.0
        if cfg.subpixel:
            if 0 < r < values.shape[0] - 1:
                dr = _subpixel_offset(values[r - 1, c], values[r, c], values[r + 1, c])
            if 0 < c < values.shape[1] - 1:
                dc = _subpixel_offset(values[r, c - 1], values[r, c], values[r, c + 1])
        centers.append(loss_field.pixel(r + dr, c + dc))

    # 亚像素位置重新计算损失与均值距离
    pts = np.array(centers)
    d = _chord_distances(conic, pts, _directions(cfg.n_dirs), 1.0 if radius is None else radius, k)
    losses, means = _dispersion(d, normalized=radius is None)
    for i, (r, c) in enumerate(picked):
        if not np.isfinite(losses[i]):
            losses[i] = values[r, c]

    if len(picked) == 1:
        logger.debug(f"损失场只有一个极小值: {pts[0].round(3).tolist()}")
        return CenterHypothesisPair(
            c_a=pts[0], c_b=pts[0].copy(),
            loss_a=float(losses[0]), loss_b=float(losses[0]),
            distance_a=float(means[0]), distance_b=float(means[0]),
            single=True, loss_field=loss_field,
        )

    if losses[1] < losses[0]:
        pts = pts[::-1]
        losses = losses[::-1]
        means = means[::-1]
    logger.debug(
        f"中心假设: {pts[0].round(3).tolist()} (loss={losses[0]:.3e}), "
        f"{pts[1].round(3).tolist()} (loss={losses[1]:.3e}), ρ_nms={rho:.2f}"
    )
    return CenterHypothesisPair(
        c_a=pts[0], c_b=pts[1],
        loss_a=float(losses[0]), loss_b=float(losses[1]),
        distance_a=float(means[0]), distance_b=float(means[1]),
        single=False, loss_field=loss_field,
    )


def build_rectifying_homography(conic: Conic, candidate) -> RectifyingHomography:
    """
    由候选圆心构造把椭圆映射为圆、并把候选点映射到圆心的单应 H = He·Ha·Hp·T

    T = A1·A2 先把椭圆平移到原点并旋转到主轴对齐，Q′ = diag(q1, q2, -1)；
    Hp 把候选点对应的极线送到无穷远，Ha 去除剩余的剪切与各向异性，He 平移回原点

    Raises:
        InvalidCandidateError: 候选点不在椭圆内部，或 b² ≤ 0
    """
    conic.require_ellipse()
    c = np.asarray(candidate, dtype=float).reshape(2)
    if not conic.contains(c):
        raise InvalidCandidateError(f"候选点 {c.tolist()} 不在椭圆内部")

    params = conic_to_params(conic)
    cos_t, sin_t = math.cos(params.theta), math.sin(params.theta)
    a1 = np.array([[cos_t, sin_t, 0.0], [-sin_t, cos_t, 0.0], [0.0, 0.0, 1.0]])
    a2 = np.array([[1.0, 0.0, -params.cx], [0.0, 1.0, -params.cy], [0.0, 0.0, 1.0]])
    t = a1 @ a2
    t_inv = np.linalg.inv(t)
    q_prime = t_inv.T @ conic.q @ t_inv
    q_prime = q_prime / -q_prime[2, 2]
    q1, q2 = q_prime[0, 0], q_prime[1, 1]
    cx, cy, _ = t @ np.array([c[0], c[1], 1.0])

    s = q1 * cx * cx + q2 * cy * cy - 1.0
    if s >= 0:
        raise InvalidCandidateError(f"候选点不在规范化椭圆内部 (s={s:.3g})")
    w = 1.0 - q1 * cx * cx
    a = q2 * cx * cy / w
    b2 = -q2 * s / (q1 * w * w)
    if not b2 > 0:
        raise InvalidCandidateError(f"b² 非正 ({b2:.3g})，候选点与椭圆不一致")
    b = math.sqrt(b2)
    x = (-cx / b + cy * a / b) / s
    y = -cy / s

    hp = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [q1 * cx, q2 * cy, -1.0]])
    ha = np.array([[1.0 / b, -a / b, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    he = np.array([[1.0, 0.0, x], [0.0, 1.0, y], [0.0, 0.0, 1.0]])
    return RectifyingHomography(h=he @ ha @ hp @ t, candidate=c)


def rectified_radius(conic: Conic, homography: RectifyingHomography) -> float:
    """校正后二次曲线的等效半径 √(A·B)；结果不是椭圆时抛 NotAnEllipseError"""
    params = conic_to_params(homography.rectify(conic).require_ellipse())
    return math.sqrt(params.a * params.b)


def rectified_radius_ratio(homography: RectifyingHomography, conic_primary: Conic,
                           conic_secondary: Conic) -> float:
    return rectified_radius(conic_primary, homography) / rectified_radius(conic_secondary, homography)


def hypothesis_ratios(pair: CenterHypothesisPair, conic_primary: Conic,
                      conic_secondary: Conic) -> List[Optional[float]]:
    """每个假设校正后的半径比；构造失败的假设为 None"""
    ratios: List[Optional[float]] = []
    for candidate in pair.hypotheses:
        try:
            h = build_rectifying_homography(conic_primary, candidate)
            ratios.append(rectified_radius_ratio(h, conic_primary, conic_secondary))
        except EstimationError as e:
            logger.debug(f"假设 {np.round(candidate, 3).tolist()} 无法校正: {e}")
            ratios.append(None)
    return ratios


def disambiguate_by_ratio(pair: CenterHypothesisPair, conic_primary: Conic,
                          conic_secondary: Conic, physical_ratio: float) -> np.ndarray:
    """
    选出校正后半径比最接近物理半径比 r̂₁/r̂₂ 的假设

    Raises:
        DisambiguationError: 两个假设都无法构造单应
    """
    if not physical_ratio > 0:
        raise InputError(f"物理半径比必须为正，实际 {physical_ratio}")
    if pair.single:
        return pair.c_a

    ratios = hypothesis_ratios(pair, conic_primary, conic_secondary)
    scored = [(abs(r - physical_ratio), i) for i, r in enumerate(ratios) if r is not None]
    if not scored:
        raise DisambiguationError("两个圆心假设都无法构造校正单应")
    _, best = min(scored)
    logger.debug(f"半径比消歧: 候选比值 {ratios}，物理比值 {physical_ratio:.4f}，选择 #{best}")
    return pair.hypotheses[best]


def select_by_loss_rank(pair: CenterHypothesisPair) -> np.ndarray:
    """没有共面配对圆时的退路：按记录的损失值取较小者，相等时取 c_a"""
    if pair.single or pair.loss_a <= pair.loss_b:
        return pair.c_a
    return pair.c_b
