"""
估计模块
鲁棒圆拟合、投影圆心修正与消歧、PnP
"""

from .robust import RansacConfig, RansacReport, run_ransac, ransac_fit_circle, fit_circle_decoupled
from .center_refine import (
    SearchConfig,
    CenterHypothesisPair,
    find_center_hypotheses,
    disambiguate_by_ratio,
    select_by_loss_rank,
)
from .pnp import (
    Correspondence,
    AmbiguousCorrespondence,
    PoseEstimate,
    solve_pnp,
    solve_pnp_ransac,
    solve_pnp_paired,
)

__all__ = [
    'RansacConfig', 'RansacReport', 'run_ransac', 'ransac_fit_circle', 'fit_circle_decoupled',
    'SearchConfig', 'CenterHypothesisPair', 'find_center_hypotheses',
    'disambiguate_by_ratio', 'select_by_loss_rank',
    'Correspondence', 'AmbiguousCorrespondence', 'PoseEstimate',
    'solve_pnp', 'solve_pnp_ransac', 'solve_pnp_paired',
]
