"""
二次曲线 / 椭圆工具
齐次二次曲线矩阵 Q：点 p = [u, v, 1]ᵀ 在曲线上当且仅当 pᵀQp = 0

归一化约定：‖Q‖_F = 1，且左上 2x2 块的迹为正，于是椭圆内部 pᵀQp < 0
"""

import math
from dataclasses import dataclass
from typing import Dict, Tuple

import numpy as np

from geometry.core import Circle3D, Intrinsics, RigidTransform, circle_basis
from utils.errors import (
    EmptyRegionError,
    InputError,
    InsufficientPointsError,
    InvalidCandidateError,
    NotAnEllipseError,
    ProjectionError,
)


@dataclass(frozen=True, eq=False)
class Conic:
    """归一化的对称 3x3 二次曲线矩阵"""
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (3, 3) or not np.all(np.isfinite(q)):
            raise InputError(f"二次曲线矩阵必须为有限的 3x3 矩阵，实际形状: {q.shape}")
        q = 0.5 * (q + q.T)
        norm = np.linalg.norm(q, "fro")
        if norm < 1e-300:
            raise NotAnEllipseError("二次曲线矩阵为零")
        q = q / norm
        if np.trace(q[:2, :2]) < 0:
            q = -q
        q.setflags(write=False)
        object.__setattr__(self, "q", q)

    @property
    def A(self) -> np.ndarray:
        return self.q[:2, :2]

    @property
    def b(self) -> np.ndarray:
        return self.q[:2, 2]

    @property
    def f(self) -> float:
        return float(self.q[2, 2])

    def evaluate(self, pixels) -> np.ndarray:
        """pᵀQp，pixels 为 (N, 2) 或 (2,)"""
        p = np.asarray(pixels, dtype=float)
        x = p[..., 0]
        y = p[..., 1]
        q = self.q
        return (q[0, 0] * x * x + 2.0 * q[0, 1] * x * y + q[1, 1] * y * y
                + 2.0 * q[0, 2] * x + 2.0 * q[1, 2] * y + q[2, 2])

    def contains(self, pixels) -> np.ndarray:
        """严格位于椭圆内部"""
        return self.evaluate(pixels) < 0

    def is_ellipse(self) -> bool:
        a = self.A
        det_a = np.linalg.det(a)
        tr = np.trace(a)
        if not det_a > 1e-12 * tr * tr:
            return False
        center = np.linalg.solve(a, -self.b)
        return bool(self.f + self.b @ center < 0)

    def require_ellipse(self) -> "Conic":
        if not self.is_ellipse():
            raise NotAnEllipseError("二次曲线不是实椭圆")
        return self

    @property
    def center(self) -> np.ndarray:
        self.require_ellipse()
        return np.linalg.solve(self.A, -self.b)

    def to_dict(self) -> Dict:
        return {"Q": self.q.tolist()}


@dataclass(frozen=True)
class EllipseParams:
    """
    椭圆几何参数

    Args:
        cx, cy: 中心（像素）
        a, b: 半长轴、半短轴，a ≥ b > 0
        theta: 长轴方向，[0, π)
    """
    cx: float
    cy: float
    a: float
    b: float
    theta: float = 0.0

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.cx, self.cy, self.a, self.b, self.theta)):
            raise InputError("椭圆参数含非有限值")
        if not (self.a >= self.b > 0):
            raise InputError(f"椭圆半轴必须满足 a ≥ b > 0，实际 a={self.a}, b={self.b}")

    @property
    def center(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def to_dict(self) -> Dict[str, float]:
        return {"cx": self.cx, "cy": self.cy, "a": self.a, "b": self.b, "theta": self.theta}


def _hartley_transform(points: np.ndarray) -> np.ndarray:
    """平移到质心并缩放，使平均距离为 √2"""
    mean = points.mean(axis=0)
    dist = np.linalg.norm(points - mean, axis=1).mean()
    s = math.sqrt(2.0) / dist if dist > 0 else 1.0
    return np.array([
        [s, 0.0, -s * mean[0]],
        [0.0, s, -s * mean[1]],
        [0.0, 0.0, 1.0],
    ])


def fit_conic(points) -> Conic:
    """
    最小二乘二次曲线拟合（代数误差，SVD，‖q‖ = 1）

    Args:
        points: (N, 2) 边界像素，N ≥ 5

    Returns:
        归一化的 Conic

    Raises:
        InsufficientPointsError: 点数少于 5
        NotAnEllipseError: 拟合结果不是椭圆（例如点共线）
    """
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise InputError(f"像素点形状必须为 (N, 2)，实际: {p.shape}")
    if len(p) < 5:
        raise InsufficientPointsError(f"二次曲线拟合至少需要 5 个点，实际 {len(p)}")

    t = _hartley_transform(p)
    h = np.column_stack([p, np.ones(len(p))]) @ t.T
    x, y = h[:, 0], h[:, 1]
    design = np.column_stack([x * x, x * y, y * y, x, y, np.ones(len(p))])
    _, _, vt = np.linalg.svd(design)
    a, b, c, d, e, f = vt[-1]
    q_hat = np.array([
        [a, b / 2.0, d / 2.0],
        [b / 2.0, c, e / 2.0],
        [d / 2.0, e / 2.0, f],
    ])
    conic = Conic(t.T @ q_hat @ t)
    if not conic.is_ellipse():
        raise NotAnEllipseError(f"拟合结果不是椭圆 (N={len(p)})")
    return conic


def conic_to_params(conic: Conic) -> EllipseParams:
    """二次曲线 → 几何参数"""
    conic.require_ellipse()
    center = np.linalg.solve(conic.A, -conic.b)
    k = -(conic.f + conic.b @ center)
    eigvals, eigvecs = np.linalg.eigh(conic.A)
    lam_min, lam_max = eigvals
    major = math.sqrt(k / lam_min)
    minor = math.sqrt(k / lam_max)
    if lam_max - lam_min <= 1e-12 * lam_max:
        theta = 0.0
    else:
        vx, vy = eigvecs[:, 0]
        theta = math.atan2(vy, vx) % math.pi
        if theta >= math.pi:
            theta = 0.0
    return EllipseParams(float(center[0]), float(center[1]), major, minor, theta)


def params_to_conic(params: EllipseParams) -> Conic:
    """几何参数 → 二次曲线"""
    c, s = math.cos(params.theta), math.sin(params.theta)
    rot = np.array([[c, -s], [s, c]])
    a = rot @ np.diag([1.0 / params.a ** 2, 1.0 / params.b ** 2]) @ rot.T
    center = params.center
    b = -a @ center
    f = center @ a @ center - 1.0
    q = np.zeros((3, 3))
    q[:2, :2] = a
    q[:2, 2] = b
    q[2, :2] = b
    q[2, 2] = f
    return Conic(q)


def line_conic_roots(conic: Conic, through: np.ndarray, directions: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    直线 x = p + t·d 与椭圆交点的参数 t₋ < 0 < t₊（批量）

    Args:
        through: (M, 2) 直线经过的点
        directions: (n, 2) 单位方向

    Returns:
        (t_minus, t_plus)，形状均为 (M, n)；p 不在内部时对应位置为 NaN
    """
    a = conic.A
    p = np.atleast_2d(np.asarray(through, dtype=float))
    d = np.atleast_2d(np.asarray(directions, dtype=float))
    alpha = np.einsum("ni,ij,nj->n", d, a, d)[None, :]
    beta = (p @ a + conic.b) @ d.T
    g = conic.evaluate(p)[:, None]
    disc = beta * beta - alpha * g
    inside = (g < 0) & (disc > 0)
    root = np.sqrt(np.where(inside, disc, np.nan))
    # 数值稳定的二次方程求根
    sign = np.where(beta >= 0, 1.0, -1.0)
    q = -(beta + sign * root)
    t1 = q / alpha
    t2 = g / q
    return np.minimum(t1, t2), np.maximum(t1, t2)


def line_conic_intersect(conic: Conic, through, gamma: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    过 through、方向角 gamma 的直线与椭圆的两个交点

    Returns:
        (a, b)：a 在 -d 方向，b 在 +d 方向，through 位于线段 ab 内

    Raises:
        InvalidCandidateError: through 不在椭圆内部
    """
    p = np.asarray(through, dtype=float).reshape(1, 2)
    d = np.array([[math.cos(gamma), math.sin(gamma)]])
    t_minus, t_plus = line_conic_roots(conic, p, d)
    if not (np.isfinite(t_minus[0, 0]) and np.isfinite(t_plus[0, 0])):
        raise InvalidCandidateError(f"点 {p[0].tolist()} 不在椭圆内部，直线与椭圆没有两个交点")
    return p[0] + t_minus[0, 0] * d[0], p[0] + t_plus[0, 0] * d[0]


def bounding_box(params: EllipseParams) -> Tuple[float, float, float, float]:
    """椭圆的轴对齐包围盒 (xmin, xmax, ymin, ymax)"""
    c, s = math.cos(params.theta), math.sin(params.theta)
    ex = math.sqrt((params.a * c) ** 2 + (params.b * s) ** 2)
    ey = math.sqrt((params.a * s) ** 2 + (params.b * c) ** 2)
    return params.cx - ex, params.cx + ex, params.cy - ey, params.cy + ey


def center_of_mass(conic: Conic) -> np.ndarray:
    """
    椭圆区域的一阶矩：所有严格位于内部的整数像素的平均坐标

    Raises:
        EmptyRegionError: 内部没有整数像素
    """
    params = conic_to_params(conic)
    xmin, xmax, ymin, ymax = bounding_box(params)
    xs = np.arange(math.floor(xmin), math.ceil(xmax) + 1, dtype=float)
    ys = np.arange(math.floor(ymin), math.ceil(ymax) + 1, dtype=float)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.stack([gx.ravel(), gy.ravel()], axis=1)
    inside = conic.contains(grid)
    if not inside.any():
        raise EmptyRegionError(
            f"椭圆内部没有整数像素 (a={params.a:.3g}, b={params.b:.3g})"
        )
    return grid[inside].mean(axis=0)


def project_circle_to_conic(circle: Circle3D, pose: RigidTransform, k: Intrinsics) -> Conic:
    """
    三维圆在图像中的精确成像二次曲线

    平面到图像的单应 G = K [u v c]，圆在平面坐标下为 diag(1, 1, -r²)，
    像平面上 Q = G⁻ᵀ diag(1, 1, -r²) G⁻¹

    Raises:
        ProjectionError: 圆有部分在相机后方，或相机中心位于圆所在平面内
    """
    center = pose.apply(circle.center)
    normal = pose.rotation @ circle.normal
    u, v = circle_basis(normal)
    reach = circle.radius * math.hypot(u[2], v[2])
    if center[2] - reach <= 0:
        raise ProjectionError(f"圆的一部分位于相机后方 (Z_c={center[2]:.4g}, 伸展={reach:.4g})")
    g = k.K @ np.column_stack([u, v, center])
    if abs(np.linalg.det(g)) < 1e-12 * np.linalg.norm(g) ** 3:
        raise ProjectionError("相机中心位于圆所在平面内，成像退化为线段")
    g_inv = np.linalg.inv(g)
    return Conic(g_inv.T @ np.diag([1.0, 1.0, -circle.radius ** 2]) @ g_inv)


def transform_conic(conic: Conic, h: np.ndarray) -> Conic:
    """点按 x' = H x 变换时，二次曲线变为 H⁻ᵀ Q H⁻¹"""
    h_inv = np.linalg.inv(np.asarray(h, dtype=float))
    return Conic(h_inv.T @ conic.q @ h_inv)


def axis_ratio(conic: Conic) -> float:
    """长短轴之比（≥ 1，圆为 1）"""
    conic.require_ellipse()
    eigvals = np.linalg.eigvalsh(conic.A)
    return float(math.sqrt(eigvals[1] / eigvals[0]))
