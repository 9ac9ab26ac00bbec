"""Planner configurations: extended-space and limited-space planners."""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Protocol, Tuple

from ..models.experiment import PlannerKind
from ..models.params import PlannerSettings, VehicleKind
from ..models.state import NavAction, POMDPState
from ..models.world import Environment
from ..planners.despot_solver import DespotSolver
from ..planners.fmm_planner import TravelTimeGrid, build_travel_time_grid
from ..planners.hybrid_astar import AStarPath, build_potential_field, plan_path
from ..planners.prm_planner import Roadmap, build_roadmap
from ..planners.rollout_policies import (
    AStarPathSource,
    FmmHeadingSource,
    HeadingSource,
    PrmHeadingSource,
    StraightLineSource,
)
from ..utils.seed_utils import derive_seed
from .belief_service import IntentionBelief
from .pomdp_service import legal_actions, speed_actions

logger = logging.getLogger(__name__)

# Share of the per-step budget given to path search in the limited-space planner.
LS_PATH_SHARE = 0.3
# A* expansion cap used whenever search is capped by iterations instead of time.
DEFAULT_EXPANSION_CAP = 4000


def apply_budget(
    settings: PlannerSettings, budget_s: Optional[float] = None, iteration_cap: Optional[int] = None
) -> PlannerSettings:
    """Settings with the per-step budget and, when given, iteration caps for every search."""
    solver = settings.solver
    path = settings.path
    if budget_s is not None:
        solver = solver.model_copy(update={'budget_s': budget_s})
    if iteration_cap is not None:
        solver = solver.model_copy(update={'iteration_cap': iteration_cap})
        if path.expansion_cap is None:
            path = path.model_copy(update={'expansion_cap': DEFAULT_EXPANSION_CAP})
    return settings.model_copy(update={'solver': solver, 'path': path})


@dataclass(frozen=True)
class PlannerInput:
    """What a planner sees at one step: the tracked pedestrians and their beliefs."""

    state: POMDPState
    belief: IntentionBelief
    seed: int


@dataclass
class PlanResult:
    action: NavAction
    stats: Dict[str, Any] = field(default_factory=dict)


class NavigationPlanner(Protocol):
    kind: PlannerKind

    def plan(self, inp: PlannerInput) -> PlanResult:
        ...

    def reset(self) -> None:
        ...


class ESPlanner:
    """Extended-space planner: tree search over heading and speed with a fixed path source."""

    def __init__(self, kind: PlannerKind, env: Environment, settings: PlannerSettings, source: HeadingSource) -> None:
        self.kind = kind
        self.env = env
        self.settings = settings
        self.source = source

    def reset(self) -> None:
        pass

    def plan(self, inp: PlannerInput) -> PlanResult:
        solver = DespotSolver(self.source, self.settings, self.env, legal_actions)
        result = solver.search(inp.belief, inp.state, inp.seed)
        return PlanResult(result.action, result.stats.to_dict())


class LSPlanner:
    """Limited-space planner: hybrid A* path each step, then speed-only search along it.

    Its reward model has no static-obstacle term; the path already keeps clear of obstacles.
    """

    kind = PlannerKind.LS_ASTAR

    def __init__(self, env: Environment, settings: PlannerSettings) -> None:
        self.env = env
        reward = settings.reward.model_copy(update={'obstacle_penalty': False})
        self.settings = settings.model_copy(update={'reward': reward})
        self._path: Optional[AStarPath] = None

    def reset(self) -> None:
        self._path = None

    def plan(self, inp: PlannerInput) -> PlanResult:
        kin = self.settings.kinematics
        field_ = build_potential_field(inp.state.pedestrian_positions(), inp.belief, self.settings.path, kin.ped_speed)
        path = plan_path(self.env, inp.state.vehicle, field_, self.settings.path, self.settings.reward, previous=self._path)
        self._path = path
        source = AStarPathSource(path, inp.state.vehicle.goal)
        result = DespotSolver(source, self.settings, self.env, speed_actions).search(inp.belief, inp.state, inp.seed)
        stats = result.stats.to_dict()
        stats.update({'path_expansions': path.expansions, 'path_reused': path.reused, 'path_length': round(path.length, 3)})
        return PlanResult(result.action, stats)


class PlannerService:
    """Builds planners and caches the static path sources per environment."""

    def __init__(self) -> None:
        self._fields: Dict[Tuple[str, ...], TravelTimeGrid] = {}
        self._roadmaps: Dict[Tuple[str, ...], Roadmap] = {}

    def travel_time_field(self, env: Environment, settings: PlannerSettings) -> TravelTimeGrid:
        key = (env.model_dump_json(), settings.field.model_dump_json(), str(settings.reward.d_obs))
        if key not in self._fields:
            self._fields[key] = build_travel_time_grid(env, settings.field, settings.reward.d_obs)
        return self._fields[key]

    def roadmap(self, env: Environment, settings: PlannerSettings, seed: int) -> Roadmap:
        key = (env.model_dump_json(), settings.field.model_dump_json(), str(settings.reward.d_obs), str(seed))
        if key not in self._roadmaps:
            f = settings.field
            self._roadmaps[key] = build_roadmap(
                env, f.n_prm, f.k_prm, derive_seed(seed, 'prm'), settings.reward.d_obs, f.prm_retries
            )
        return self._roadmaps[key]

    def create_planner(
        self, kind: PlannerKind, env: Environment, settings: Optional[PlannerSettings] = None, seed: int = 0
    ) -> NavigationPlanner:
        """Planner for a configuration; budgets are taken from settings.solver.budget_s."""
        settings = settings or PlannerSettings()
        if kind is PlannerKind.LS_ASTAR:
            total = settings.solver.budget_s
            settings = settings.model_copy(update={
                'path': settings.path.model_copy(update={'budget_s': total * LS_PATH_SHARE}),
                'solver': settings.solver.model_copy(update={'budget_s': total * (1.0 - LS_PATH_SHARE)}),
            })
            return LSPlanner(env, settings)
        if kind is PlannerKind.ES_FMM:
            source: HeadingSource = FmmHeadingSource(self.travel_time_field(env, settings), settings.field.alpha)
        elif kind is PlannerKind.ES_PRM:
            source = PrmHeadingSource(self.roadmap(env, settings, seed), env, settings.reward.d_obs)
        elif kind is PlannerKind.ES_NHV_STRAIGHT:
            if settings.kinematics.kind is not VehicleKind.DUBINS:
                logger.warning("Straight-line roll-outs are meant for the Dubins vehicle")
            source = StraightLineSource(env.vehicle_goal)
        else:
            raise ValueError(f"Unknown planner kind: {kind}")
        return ESPlanner(kind, env, settings, source)


# Global planner service instance
_planner_service: Optional[PlannerService] = None


def get_planner_service() -> PlannerService:
    """Get the global planner service instance."""
    global _planner_service
    if _planner_service is None:
        _planner_service = PlannerService()
    return _planner_service


def create_planner(
    kind: PlannerKind, env: Environment, settings: Optional[PlannerSettings] = None, seed: int = 0
) -> NavigationPlanner:
    return get_planner_service().create_planner(kind, env, settings, seed)
