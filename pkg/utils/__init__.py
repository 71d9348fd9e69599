"""
工具模块
包含日志、异常等通用功能
"""

from .logger import get_logger, get_module_logger, setup_logger
from .errors import (
    CircleCalError,
    InputError,
    InsufficientPointsError,
    EstimationError,
    DegenerateConfigurationError,
    NonCircleSolutionError,
    DegenerateEntityError,
    NoConsensusError,
    NotAnEllipseError,
    EmptyRegionError,
    ProjectionError,
    DegenerateChordError,
    InvalidCandidateError,
    DisambiguationError,
)

__all__ = [
    'get_logger', 'get_module_logger', 'setup_logger',
    'CircleCalError', 'InputError', 'InsufficientPointsError', 'EstimationError',
    'DegenerateConfigurationError', 'NonCircleSolutionError', 'DegenerateEntityError',
    'NoConsensusError', 'NotAnEllipseError', 'EmptyRegionError', 'ProjectionError',
    'DegenerateChordError', 'InvalidCandidateError', 'DisambiguationError',
]
