"""Numerical planners: travel-time fields, roadmaps, hybrid A*, roll-outs and tree search."""

from .despot_solver import DespotSolver, SearchResult, SearchStats, plan
from .fmm_planner import TravelTimeGrid, build_travel_time_grid, fmm_next_heading, solve_eikonal
from .hybrid_astar import AStarPath, entropy_mode, plan_path
from .prm_planner import Roadmap, build_roadmap, prm_next_heading, shortest_paths_to_goal
from .rollout_policies import (
    AStarPathSource,
    FmmHeadingSource,
    PrmHeadingSource,
    RolloutPolicy,
    StraightLineSource,
    delta_ro,
    reactive_speed,
    rollout_value,
)

__all__ = [
    'AStarPath', 'AStarPathSource', 'DespotSolver', 'FmmHeadingSource', 'PrmHeadingSource', 'Roadmap',
    'RolloutPolicy', 'SearchResult', 'SearchStats', 'StraightLineSource', 'TravelTimeGrid',
    'build_roadmap', 'build_travel_time_grid', 'delta_ro', 'entropy_mode', 'fmm_next_heading', 'plan',
    'plan_path', 'prm_next_heading', 'reactive_speed', 'rollout_value', 'shortest_paths_to_goal',
    'solve_eikonal',
]
