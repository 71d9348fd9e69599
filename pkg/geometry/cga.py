"""
共形几何代数（CGA）圆拟合

三维点嵌入 5 维共形空间 {e1, e2, e3, n0, n∞}，度量满足 n0·n∞ = -1。
球、平面是共形向量，圆是球与平面的外积（二重向量）。
圆拟合归结为 5x5 非对称矩阵 P = D Dᵀ M / N 的特征值问题：
取两个最小的非负特征值对应的特征向量 V、U，E = V ∧ U 即为拟合圆。
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from config.estimation import EIGEN_TOLERANCE_FACTOR, CIRCLE_MIN_SAMPLE
from geometry.core import Circle3D, as_points, as_vec3, canonical_normal
from utils.errors import (
    DegenerateConfigurationError,
    DegenerateEntityError,
    InsufficientPointsError,
    NonCircleSolutionError,
)
from utils.logger import get_module_logger

logger = get_module_logger("cga")


# 基底顺序 e1, e2, e3, n0, n∞
NULL_METRIC = np.array([
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, -1.0],
    [0.0, 0.0, 0.0, -1.0, 0.0],
])

# 二重向量基底：e1∧e2, e1∧e3, e2∧e3, e1∧n0, e2∧n0, e3∧n0, e1∧n∞, e2∧n∞, e3∧n∞, n0∧n∞
BIVECTOR_BASIS = (
    (0, 1), (0, 2), (1, 2),
    (0, 3), (1, 3), (2, 3),
    (0, 4), (1, 4), (2, 4),
    (3, 4),
)
BIVECTOR_LABELS = (
    "e1^e2", "e1^e3", "e2^e3",
    "e1^n0", "e2^n0", "e3^n0",
    "e1^ninf", "e2^ninf", "e3^ninf",
    "n0^ninf",
)

_ENTITY_EPS = 1e-12


def _coeffs(value) -> np.ndarray:
    return np.asarray(getattr(value, "coeffs", value), dtype=float)


def inner_product(a, b) -> float:
    """共形内积 aᵀ M b"""
    return float(_coeffs(a) @ NULL_METRIC @ _coeffs(b))


@dataclass(frozen=True, eq=False)
class ConformalPoint:
    """共形点 P = p + n0 + ½‖p‖² n∞"""
    coeffs: np.ndarray

    @property
    def euclidean(self) -> np.ndarray:
        return self.coeffs[:3]

    @property
    def n0(self) -> float:
        return float(self.coeffs[3])

    @property
    def ninf(self) -> float:
        return float(self.coeffs[4])


@dataclass(frozen=True, eq=False)
class SphereEntity:
    """球 S = C - ½ρ² n∞（C 为球心的共形点）"""
    coeffs: np.ndarray

    @classmethod
    def from_center_radius(cls, center, radius: float) -> "SphereEntity":
        c = as_vec3(center, "center")
        return cls(np.concatenate([c, [1.0, 0.5 * (c @ c) - 0.5 * radius ** 2]]))

    @property
    def center(self) -> np.ndarray:
        w = self.coeffs[3]
        if abs(w) < _ENTITY_EPS:
            raise DegenerateEntityError("n0 系数为零，该实体不是有限球")
        return self.coeffs[:3] / w

    @property
    def radius(self) -> float:
        r2 = self.square_norm() / self.coeffs[3] ** 2
        return float(np.sqrt(max(r2, 0.0)))

    def square_norm(self) -> float:
        return inner_product(self, self)


@dataclass(frozen=True, eq=False)
class PlaneEntity:
    """平面 PL = n + δ n∞，即 n·x = δ"""
    coeffs: np.ndarray

    @classmethod
    def from_normal_offset(cls, normal, offset: float) -> "PlaneEntity":
        n = as_vec3(normal, "normal")
        if np.linalg.norm(n) < _ENTITY_EPS:
            raise DegenerateEntityError("平面法向量为零")
        return cls(np.concatenate([n, [0.0, float(offset)]]))

    @property
    def normal(self) -> np.ndarray:
        return self.coeffs[:3]

    @property
    def offset(self) -> float:
        return float(self.coeffs[4])

    def square_norm(self) -> float:
        return inner_product(self, self)


@dataclass(frozen=True, eq=False)
class CircleBivector:
    """
    圆的二重向量 E = V ∧ U，10 个系数按 BIVECTOR_BASIS 排列

    E 只确定到一个非零倍数；提取圆参数的公式对缩放不变。
    """
    coeffs: np.ndarray

    @classmethod
    def from_vectors(cls, v, u) -> "CircleBivector":
        v = _coeffs(v)
        u = _coeffs(u)
        return cls(np.array([v[i] * u[j] - v[j] * u[i] for i, j in BIVECTOR_BASIS]))

    @classmethod
    def from_circle(cls, circle: Circle3D) -> "CircleBivector":
        """载体球 ∧ 所在平面"""
        sphere = SphereEntity.from_center_radius(circle.center, circle.radius)
        plane = PlaneEntity.from_normal_offset(circle.normal, circle.normal @ circle.center)
        return cls.from_vectors(sphere, plane)

    def _parts(self) -> Tuple[np.ndarray, np.ndarray, float, np.ndarray]:
        e = self.coeffs / np.linalg.norm(self.coeffs)
        n = -e[3:6]
        delta = e[9]
        # w = c × n
        w = np.array([e[2], -e[1], e[0]])
        return n, w, delta, e[6:9]

    def to_circle(self) -> Circle3D:
        """
        从二重向量提取圆心、法向量、半径

        Raises:
            DegenerateConfigurationError: 两个特征向量都是平面（点共线）
            NonCircleSolutionError: r² ≤ 0
        """
        if not np.all(np.isfinite(self.coeffs)) or np.linalg.norm(self.coeffs) < _ENTITY_EPS:
            raise DegenerateConfigurationError("二重向量为零，无法提取圆")
        n, w, delta, e_inf = self._parts()
        nn = n @ n
        if nn < _ENTITY_EPS:
            raise DegenerateConfigurationError(f"二重向量的法向分量为零 (‖n‖²={nn:.3g})，点集可能共线")
        center = (np.cross(n, w) + delta * n) / nn
        r2 = center @ center + 2.0 * (n @ e_inf) / nn - 2.0 * delta ** 2 / nn
        if not np.isfinite(r2) or r2 <= 0:
            raise NonCircleSolutionError(f"提取得到的 r² 非正: {r2:.6g}")
        return Circle3D(center, canonical_normal(n), float(np.sqrt(r2)))

    def plane(self) -> PlaneEntity:
        circle = self.to_circle()
        return PlaneEntity.from_normal_offset(circle.normal, circle.normal @ circle.center)

    def carrier_sphere(self) -> SphereEntity:
        """圆心在圆所在平面上的载体球"""
        circle = self.to_circle()
        return SphereEntity.from_center_radius(circle.center, circle.radius)


@dataclass
class CgaFitResult:
    """CGA 拟合结果"""
    circle: Circle3D
    mean_residual: float
    eigenvalues_used: Tuple[float, float]
    bivector: CircleBivector


def embed(p) -> ConformalPoint:
    """P = p + n0 + ½‖p‖² n∞"""
    v = as_vec3(p)
    return ConformalPoint(np.concatenate([v, [1.0, 0.5 * (v @ v)]]))


def embed_points(points) -> np.ndarray:
    """批量嵌入，返回 (N, 5)，每行即数据矩阵 D 的一列"""
    p = as_points(points)
    return np.column_stack([p, np.ones(len(p)), 0.5 * np.einsum("ij,ij->i", p, p)])


def point_circle_distance2(p: ConformalPoint, sp: SphereEntity, pl: PlaneEntity) -> float:
    """
    点到圆的近似平方距离 (P·SP)²/SP² + (P·PL)²/PL²

    Raises:
        DegenerateEntityError: 球或平面的平方范数为零
    """
    sp2 = sp.square_norm()
    pl2 = pl.square_norm()
    if abs(sp2) < _ENTITY_EPS or abs(pl2) < _ENTITY_EPS:
        raise DegenerateEntityError(f"实体平方范数为零: SP²={sp2:.3g}, PL²={pl2:.3g}")
    return inner_product(p, sp) ** 2 / sp2 + inner_product(p, pl) ** 2 / pl2


def circle_distance2(points, circle: Circle3D) -> np.ndarray:
    """
    批量计算点集到圆的近似平方距离，RANSAC 打分和残差统计都用它

    Returns:
        (N,) 非负数组
    """
    sp = SphereEntity.from_center_radius(circle.center, circle.radius)
    pl = PlaneEntity.from_normal_offset(circle.normal, circle.normal @ circle.center)
    embedded = embed_points(points)
    to_sphere = embedded @ NULL_METRIC @ sp.coeffs
    to_plane = embedded @ NULL_METRIC @ pl.coeffs
    return to_sphere ** 2 / sp.square_norm() + to_plane ** 2 / pl.square_norm()


def _select_eigenpairs(p_matrix: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """取两个最小的实、非负（容差内）特征值及其特征向量"""
    values, vectors = linalg.eig(p_matrix)
    tol = EIGEN_TOLERANCE_FACTOR * np.linalg.norm(p_matrix, "fro")
    keep = (np.abs(values.imag) <= tol) & (values.real >= -tol)
    idx = np.flatnonzero(keep)
    if len(idx) < 2:
        raise DegenerateConfigurationError(
            f"可用实特征值不足两个: {np.round(values, 12).tolist()}"
        )
    idx = idx[np.argsort(values.real[idx])][:2]
    return values.real[idx], vectors[:, idx].real


def fit_circle_cga(points) -> CgaFitResult:
    """
    CGA 闭式圆拟合

    Args:
        points: (N, 3) 点集，N ≥ 5，不能全部共线

    Returns:
        CgaFitResult

    Raises:
        InsufficientPointsError: 点数少于 5
        DegenerateConfigurationError: 可用特征值不足或点集共线
        NonCircleSolutionError: r² ≤ 0
    """
    p = as_points(points)
    if len(p) < CIRCLE_MIN_SAMPLE:
        raise InsufficientPointsError(f"CGA 圆拟合至少需要 {CIRCLE_MIN_SAMPLE} 个点，实际 {len(p)}")

    # 中心化 + 各向同性缩放（RMS 半径为 1），改善 ½‖p‖² 一行的条件数
    mu = p.mean(axis=0)
    scale = np.sqrt(np.mean(np.sum((p - mu) ** 2, axis=1)))
    if scale < 1e-15:
        raise DegenerateConfigurationError("所有点重合")
    q = (p - mu) / scale

    d = embed_points(q).T
    p_matrix = d @ d.T @ NULL_METRIC / len(q)
    eigenvalues, vectors = _select_eigenpairs(p_matrix)

    bivector_local = CircleBivector.from_vectors(vectors[:, 0], vectors[:, 1])
    local = bivector_local.to_circle()
    circle = Circle3D(mu + scale * local.center, local.normal, scale * local.radius)

    residuals = circle_distance2(p, circle)
    result = CgaFitResult(
        circle=circle,
        mean_residual=float(residuals.mean()),
        eigenvalues_used=(float(eigenvalues[0]), float(eigenvalues[1])),
        bivector=CircleBivector.from_circle(circle),
    )
    logger.debug(
        f"CGA 拟合完成: N={len(p)}, r={circle.radius:.6f}, "
        f"λ=({eigenvalues[0]:.3e}, {eigenvalues[1]:.3e}), 平均残差={result.mean_residual:.3e}"
    )
    return result
