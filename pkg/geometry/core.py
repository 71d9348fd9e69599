"""
几何基础类型
相机内参、刚体变换、三维圆，以及针孔投影 / 反投影和位姿误差度量

约定：
    - Vec3 用形状 (3,) 的 numpy 数组表示，点集为 (N, 3)
    - Pixel 用形状 (2,) 的 numpy 数组表示，像素集为 (N, 2)
    - RigidTransform 表示 T_L^C，即把 LiDAR 坐标系下的点变换到相机坐标系
"""

from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy.spatial.transform import Rotation

from config.estimation import ORTHONORMAL_TOLERANCE
from utils.errors import InputError, ProjectionError


def as_vec3(value, name: str = "point") -> np.ndarray:
    """转换为有限的三维向量"""
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (3,) or not np.all(np.isfinite(arr)):
        raise InputError(f"{name} 必须是 3 个有限实数，实际: {value}")
    return arr


def as_points(points, name: str = "points") -> np.ndarray:
    """转换为 (N, 3) 点集"""
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and arr.size == 3:
        arr = arr.reshape(1, 3)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InputError(f"{name} 形状必须为 (N, 3)，实际: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} 含有非有限值")
    return arr


def skew(v: np.ndarray) -> np.ndarray:
    """叉乘矩阵 [v]x"""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def orthonormalize(rotation: np.ndarray) -> np.ndarray:
    """SVD 极分解，把近似旋转矩阵投影回 SO(3)"""
    u, _, vt = np.linalg.svd(np.asarray(rotation, dtype=float))
    r = u @ vt
    if np.linalg.det(r) < 0:
        u[:, -1] *= -1
        r = u @ vt
    return r


def canonical_normal(normal: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """
    统一法向量符号（点集无法观测法向量正负）

    z 分量非负；z≈0 时 y 非负；二者都≈0 时 x 非负
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    for axis in (2, 1, 0):
        if abs(n[axis]) > eps:
            return n if n[axis] > 0 else -n
    return n


@dataclass(frozen=True)
class Intrinsics:
    """针孔相机内参（无畸变）"""
    fx: float
    fy: float
    cx: float
    cy: float

    def __post_init__(self):
        values = (self.fx, self.fy, self.cx, self.cy)
        if not all(np.isfinite(v) for v in values):
            raise InputError(f"相机内参含非有限值: {values}")
        if self.fx <= 0 or self.fy <= 0:
            raise InputError(f"焦距必须为正: fx={self.fx}, fy={self.fy}")

    @property
    def K(self) -> np.ndarray:
        return np.array([
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ])

    @property
    def K_inv(self) -> np.ndarray:
        return np.array([
            [1.0 / self.fx, 0.0, -self.cx / self.fx],
            [0.0, 1.0 / self.fy, -self.cy / self.fy],
            [0.0, 0.0, 1.0],
        ])

    def to_dict(self) -> Dict[str, float]:
        return {"fx": float(self.fx), "fy": float(self.fy), "cx": float(self.cx), "cy": float(self.cy)}


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """
    刚体变换 x' = R x + t

    Args:
        rotation: 3x3 正交矩阵，det = +1（容差 1e-9）
        translation: 平移向量（米）
    """
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = as_vec3(self.translation, "translation")
        if r.shape != (3, 3) or not np.all(np.isfinite(r)):
            raise InputError(f"旋转矩阵必须为有限的 3x3 矩阵，实际形状: {r.shape}")
        if np.abs(r.T @ r - np.eye(3)).max() > ORTHONORMAL_TOLERANCE or abs(np.linalg.det(r) - 1.0) > ORTHONORMAL_TOLERANCE:
            raise InputError("旋转矩阵不是正交矩阵或 det != +1")
        r = r.copy()
        t = t.copy()
        r.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_rotvec(cls, rotvec, translation) -> "RigidTransform":
        return cls(Rotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_matrix(), translation)

    @classmethod
    def from_matrix(cls, matrix, project: bool = False) -> "RigidTransform":
        """
        从 4x4 齐次矩阵构造

        Args:
            matrix: 4x4 行优先矩阵
            project: 是否先把旋转块正交化（读取文件时使用）
        """
        m = np.asarray(matrix, dtype=float)
        if m.shape != (4, 4):
            raise InputError(f"变换矩阵必须为 4x4，实际: {m.shape}")
        if not np.allclose(m[3], [0.0, 0.0, 0.0, 1.0], atol=1e-12):
            raise InputError(f"变换矩阵最后一行必须为 [0, 0, 0, 1]: {m[3]}")
        r = orthonormalize(m[:3, :3]) if project else m[:3, :3]
        return cls(r, m[:3, 3])

    def as_matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def to_dict(self) -> Dict[str, List[List[float]]]:
        return {"T": self.as_matrix().tolist()}

    def apply(self, points) -> np.ndarray:
        """变换单点 (3,) 或点集 (N, 3)"""
        p = np.asarray(points, dtype=float)
        if p.ndim == 1:
            return self.rotation @ p + self.translation
        return p @ self.rotation.T + self.translation

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(rt, -rt @ self.translation)

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other：先 other 再 self；旋转做一次 SVD 校正避免误差累积"""
        r = orthonormalize(self.rotation @ other.rotation)
        return RigidTransform(r, self.rotation @ other.translation + self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return self.compose(other)


@dataclass(frozen=True, eq=False)
class Circle3D:
    """
    空间圆

    Args:
        center: 圆心（米）
        normal: 单位法向量；构造时归一化
        radius: 半径（米），必须为正
    """
    center: np.ndarray
    normal: np.ndarray
    radius: float

    def __post_init__(self):
        c = as_vec3(self.center, "center")
        n = as_vec3(self.normal, "normal")
        norm = np.linalg.norm(n)
        if norm < 1e-12:
            raise InputError("圆的法向量不能为零向量")
        if not np.isfinite(self.radius) or self.radius <= 0:
            raise InputError(f"圆半径必须为正，实际: {self.radius}")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "normal", n / norm)
        object.__setattr__(self, "radius", float(self.radius))

    def canonical(self) -> "Circle3D":
        """法向量按统一符号约定返回"""
        return Circle3D(self.center, canonical_normal(self.normal), self.radius)

    def basis(self) -> Tuple[np.ndarray, np.ndarray]:
        return circle_basis(self.normal)

    def points_at(self, angles) -> np.ndarray:
        """圆上给定角度处的点 (N, 3)"""
        u, v = self.basis()
        a = np.asarray(angles, dtype=float).reshape(-1, 1)
        return self.center + self.radius * (np.cos(a) * u + np.sin(a) * v)

    def transformed(self, pose: RigidTransform) -> "Circle3D":
        return Circle3D(pose.apply(self.center), pose.rotation @ self.normal, self.radius)

    def to_dict(self) -> Dict:
        return {
            "center": self.center.tolist(),
            "normal": self.normal.tolist(),
            "radius": self.radius,
        }


def circle_basis(normal: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    与法向量正交的平面内单位正交基 (u, v)，满足 u × v = n
    """
    n = np.asarray(normal, dtype=float)
    n = n / np.linalg.norm(n)
    # 选与 n 最不平行的坐标轴作为参考
    ref = np.eye(3)[np.argmin(np.abs(n))]
    u = np.cross(n, ref)
    u /= np.linalg.norm(u)
    v = np.cross(n, u)
    return u, v


def project_points(points, pose: RigidTransform, k: Intrinsics) -> np.ndarray:
    """
    针孔投影 u = fx·X/Z + cx, v = fy·Y/Z + cy

    Args:
        points: (N, 3) 点集（变换前坐标系）
        pose: 变换到相机坐标系的刚体变换
        k: 相机内参

    Returns:
        (N, 2) 像素坐标
    """
    p = np.atleast_2d(np.asarray(points, dtype=float))
    pc = pose.apply(p)
    z = pc[:, 2]
    if np.any(z <= 0):
        bad = int(np.argmin(z))
        raise ProjectionError(f"点位于相机后方或成像平面上: 相机系深度 Z={z[bad]:.6g}")
    u = k.fx * pc[:, 0] / z + k.cx
    v = k.fy * pc[:, 1] / z + k.cy
    return np.column_stack([u, v])


def project(point, pose: RigidTransform, k: Intrinsics) -> np.ndarray:
    """单点投影，返回 (2,) 像素"""
    return project_points(as_vec3(point).reshape(1, 3), pose, k)[0]


def backproject_rays(pixels, k: Intrinsics) -> np.ndarray:
    """批量反投影，返回 (N, 3) 单位视线方向（相机坐标系）"""
    px = np.atleast_2d(np.asarray(pixels, dtype=float))
    rays = np.column_stack([
        (px[:, 0] - k.cx) / k.fx,
        (px[:, 1] - k.cy) / k.fy,
        np.ones(len(px)),
    ])
    return rays / np.linalg.norm(rays, axis=1, keepdims=True)


def backproject_ray(pixel, k: Intrinsics) -> np.ndarray:
    """r = K⁻¹ũ / ‖K⁻¹ũ‖"""
    return backproject_rays(np.asarray(pixel, dtype=float).reshape(1, 2), k)[0]


def rotation_error(r_est: np.ndarray, r_gt: np.ndarray) -> float:
    """相对旋转 R_gtᵀ R_est 的轴角大小（弧度，[0, π]）"""
    rel = np.asarray(r_gt, dtype=float).T @ np.asarray(r_est, dtype=float)
    return float(Rotation.from_matrix(rel).magnitude())


def translation_error(t_est: np.ndarray, t_gt: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(t_est, dtype=float) - np.asarray(t_gt, dtype=float)))
