"""
异常模块
统一的异常层级，exit_code 对应 CLI 退出码约定：
0 成功, 2 输入错误, 3 估计失败, 4 消歧失败
"""


class CircleCalError(Exception):
    """所有业务异常的基类"""
    exit_code = 1


class InputError(CircleCalError, ValueError):
    """输入文件 / 参数不合法"""
    exit_code = 2


class InsufficientPointsError(InputError):
    """点数（或对应关系数）不足"""


class EstimationError(CircleCalError, RuntimeError):
    """估计过程失败"""
    exit_code = 3


class DegenerateConfigurationError(EstimationError):
    """退化配置（共线点、秩亏、可用特征值不足等）"""


class NonCircleSolutionError(EstimationError):
    """特征解对应虚圆 (r² <= 0)"""


class DegenerateEntityError(EstimationError):
    """共形实体的平方范数为零"""


class NoConsensusError(EstimationError):
    """RANSAC 没有任何迭代达到最小一致集"""


class NotAnEllipseError(EstimationError):
    """二次曲线不是实椭圆"""


class EmptyRegionError(EstimationError):
    """椭圆内部没有整数像素"""


class ProjectionError(EstimationError):
    """点在相机后方或投影超出图像"""


class DegenerateChordError(EstimationError):
    """弦距离公式分母过小（掠射视角）"""


class InvalidCandidateError(EstimationError):
    """候选中心不在椭圆内部，无法构造矫正单应"""


class DisambiguationError(CircleCalError):
    """两个中心假设都无法完成比例消歧"""
    exit_code = 4
