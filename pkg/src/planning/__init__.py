from .capacity import InfeasiblePlanError, PlanningError, PlanningResult, solve_joint_lp, solve_routing_lp
from .heuristics import chi_reciprocal_root, chi_root_excess, heuristic_chi, mean_extra_delay

__all__ = [
    "InfeasiblePlanError",
    "PlanningError",
    "PlanningResult",
    "solve_joint_lp",
    "solve_routing_lp",
    "chi_reciprocal_root",
    "chi_root_excess",
    "heuristic_chi",
    "mean_extra_delay",
]
