"""
几何模块
基础类型、共形几何代数圆拟合、二次曲线工具
"""

from .core import (
    Intrinsics,
    RigidTransform,
    Circle3D,
    project,
    project_points,
    backproject_ray,
    backproject_rays,
    rotation_error,
    translation_error,
    circle_basis,
)
from .cga import fit_circle_cga, circle_distance2, CgaFitResult
from .ellipse import Conic, EllipseParams, fit_conic, conic_to_params, params_to_conic

__all__ = [
    'Intrinsics', 'RigidTransform', 'Circle3D',
    'project', 'project_points', 'backproject_ray', 'backproject_rays',
    'rotation_error', 'translation_error', 'circle_basis',
    'fit_circle_cga', 'circle_distance2', 'CgaFitResult',
    'Conic', 'EllipseParams', 'fit_conic', 'conic_to_params', 'params_to_conic',
]
