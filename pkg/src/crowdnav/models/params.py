"""Typed parameter groups for the POMDP model, planners and search."""

import math
from enum import Enum
from typing import Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, Field, ValidationError, model_validator

from ..exceptions import ConfigError


class VehicleKind(str, Enum):
    HOLONOMIC = "HOLONOMIC"
    DUBINS = "DUBINS"


class PathSource(str, Enum):
    """Multi-query path generators a roll-out can follow."""

    FMM = "FMM"
    PRM = "PRM"
    ASTAR_PATH = "ASTAR_PATH"
    STRAIGHT_LINE_DUBINS = "STRAIGHT_LINE_DUBINS"


HOLONOMIC_ASTAR_HEADINGS = [float(d) for d in range(-170, 181, 10)]
DUBINS_ASTAR_HEADINGS = [float(d) for d in range(-45, 46, 5)]


class RewardParams(BaseModel):
    """Reward constants, distances and step timing."""

    r_goal: float = Field(1000.0, gt=0, description="Reward for reaching the goal region")
    r_obs: float = Field(-1000.0, lt=0, description="Penalty inside the static-obstacle margin")
    r_ped: float = Field(-1000.0, lt=0, description="Penalty for a moving vehicle near a pedestrian")
    r_sb: float = Field(-50.0, lt=0, description="Penalty for a sudden brake")
    r_t: float = Field(-1.0, lt=0, description="Per-step time penalty")
    d_g: float = Field(1.0, gt=0, description="Goal radius (m)")
    d_obs: float = Field(1.0, gt=0, description="Static obstacle margin (m)")
    d_ped: float = Field(1.0, gt=0, description="Pedestrian margin (m)")
    v_max: float = Field(2.0, gt=0, description="Vehicle speed limit (m/s)")
    gamma: float = Field(0.97, gt=0, lt=1, description="Discount factor")
    dt: float = Field(0.5, gt=0, description="Step duration (s)")
    obstacle_penalty: bool = Field(True, description="Whether R_obs is part of the reward")


class KinematicsParams(BaseModel):
    """Vehicle and pedestrian motion model."""

    kind: VehicleKind = Field(VehicleKind.HOLONOMIC, description="Vehicle model")
    wheelbase: float = Field(1.0, gt=0, description="Dubins wheelbase L (m)")
    max_steer_deg: float = Field(45.0, gt=0, lt=90, description="Dubins steering limit (deg)")
    obs_cell: float = Field(1.0, gt=0, description="Observation grid cell (m)")
    ped_speed: float = Field(1.0, gt=0, description="Pedestrian preferred speed (m/s)")
    ped_noise_sigma: float = Field(0.1, ge=0, description="Std of pedestrian step noise (m)")
    ped_noise_bound: float = Field(0.3, ge=0, description="Truncation of pedestrian step noise (m)")
    safety_radius: float = Field(1.0, gt=0, description="Unsafe distance for a moving vehicle (m)")

    @property
    def max_curvature(self) -> float:
        return math.tan(math.radians(self.max_steer_deg)) / self.wheelbase


class BeliefParams(BaseModel):
    """Intention likelihood parameters."""

    kappa: float = Field(2.0, gt=0, description="Concentration of the progress likelihood")
    floor: float = Field(1e-3, ge=0, lt=1, description="Posterior floor per goal")


class RolloutConfig(BaseModel):
    """Reactive roll-out controller."""

    d_near: float = Field(3.0, gt=0, description="Slow down below this pedestrian distance (m)")
    d_far: float = Field(6.0, gt=0, description="Speed up above this pedestrian distance (m)")
    m_steps: int = Field(40, ge=0, description="Roll-out horizon (steps)")
    source: PathSource = Field(PathSource.FMM, description="Heading generator")

    @model_validator(mode='after')
    def _check_band(self) -> 'RolloutConfig':
        if not self.d_near < self.d_far:
            raise ValueError("d_near must be smaller than d_far")
        return self


class SolverConfig(BaseModel):
    """Belief-tree search settings. The discount comes from RewardParams.gamma."""

    k_scenarios: int = Field(100, gt=0, description="Sampled scenarios K")
    budget_s: float = Field(0.5, gt=0, description="Wall-clock budget per decision (s)")
    max_depth: int = Field(90, ge=1, description="Maximum tree depth D")
    regularization: float = Field(0.0, ge=0, description="Per-node penalty lambda")
    xi: float = Field(0.95, ge=0, le=1, description="Target gap fraction for exploration")
    iteration_cap: Optional[int] = Field(None, ge=1, description="Trial cap; disables the wall clock")
    n_ped: int = Field(6, ge=0, description="Pedestrians tracked in the planning state")
    time_margin: float = Field(0.05, ge=0, lt=1, description="Fraction of budget kept in reserve")


class PathCostParams(BaseModel):
    """Hybrid A* search and potential-field costs."""

    c_st: float = Field(50.0, ge=0, description="Static obstacle cost weight")
    c_ped: float = Field(100.0, ge=0, description="Pedestrian potential weight")
    discount: float = Field(0.95, gt=0, le=1, description="Per-step cost discount lambda")
    headings_deg: List[float] = Field(default_factory=lambda: list(HOLONOMIC_ASTAR_HEADINGS), description="Relative heading actions (deg)")
    step: float = Field(1.0, gt=0, description="Expansion step length (m)")
    heading_bucket_deg: float = Field(10.0, gt=0, description="Closed-set heading bucket (deg)")
    budget_s: float = Field(0.15, gt=0, description="Wall-clock budget per path (s)")
    expansion_cap: Optional[int] = Field(None, ge=1, description="Expansion cap; disables the wall clock")
    weights: List[float] = Field(default_factory=lambda: [2.5, 1.5, 1.0], description="Anytime heuristic weights")
    st_margin: float = Field(3.0, gt=0, description="Width of the static cost band beyond d_obs (m)")
    mode_a_base: float = Field(2.0, gt=0, description="Mode A disk radius at zero entropy (m)")
    mode_a_scale: float = Field(2.0, ge=0, description="Mode A radius growth per unit entropy (m)")
    mode_b_radius: float = Field(1.5, gt=0, description="Mode B disk radius (m)")
    mode_b_spacing: float = Field(1.0, gt=0, description="Mode B disk spacing (m)")
    mode_b_horizon_s: float = Field(5.0, gt=0, description="Mode B prediction horizon (s)")
    entropy_threshold: float = Field(0.5, ge=0, le=1, description="Normalized entropy for mode A")

    @model_validator(mode='after')
    def _check_weights(self) -> 'PathCostParams':
        if not self.weights or any(w < 1.0 for w in self.weights):
            raise ValueError("heuristic weights must be >= 1")
        return self


class FieldParams(BaseModel):
    """FMM grid and PRM construction settings."""

    cell: float = Field(1.0, gt=0, description="FMM cell size (m)")
    exact_radius: float = Field(5.0, ge=0, description="Radius of exact initialization around the source (m)")
    alpha: float = Field(1.0, gt=0, description="Descent step in cell lengths")
    n_prm: int = Field(100, ge=2, description="Roadmap nodes including start and goal")
    k_prm: int = Field(10, ge=1, description="Nearest neighbours per node")
    prm_retries: int = Field(5, ge=1, description="Roadmap rebuild attempts")


_OVERRIDE_KEYS: Dict[str, Tuple[str, str]] = {
    'R_GOAL': ('reward', 'r_goal'),
    'R_OBS': ('reward', 'r_obs'),
    'R_PED': ('reward', 'r_ped'),
    'R_SB': ('reward', 'r_sb'),
    'R_T': ('reward', 'r_t'),
    'D_G': ('reward', 'd_g'),
    'D_OBS': ('reward', 'd_obs'),
    'D_PED': ('reward', 'd_ped'),
    'V_MAX': ('reward', 'v_max'),
    'GAMMA': ('reward', 'gamma'),
    'DT': ('reward', 'dt'),
    'WHEELBASE': ('kinematics', 'wheelbase'),
    'MAX_STEER_DEG': ('kinematics', 'max_steer_deg'),
    'OBS_CELL': ('kinematics', 'obs_cell'),
    'PED_SPEED': ('kinematics', 'ped_speed'),
    'PED_NOISE_SIGMA': ('kinematics', 'ped_noise_sigma'),
    'PED_NOISE_BOUND': ('kinematics', 'ped_noise_bound'),
    'SAFETY_RADIUS': ('kinematics', 'safety_radius'),
    'BELIEF_KAPPA': ('belief', 'kappa'),
    'BELIEF_FLOOR': ('belief', 'floor'),
    'D_NEAR': ('rollout', 'd_near'),
    'D_FAR': ('rollout', 'd_far'),
    'M_STEPS': ('rollout', 'm_steps'),
    'K_SCENARIOS': ('solver', 'k_scenarios'),
    'MAX_DEPTH': ('solver', 'max_depth'),
    'REGULARIZATION': ('solver', 'regularization'),
    'XI': ('solver', 'xi'),
    'N_PED': ('solver', 'n_ped'),
    'C_ST': ('path', 'c_st'),
    'C_PED': ('path', 'c_ped'),
    'PATH_DISCOUNT': ('path', 'discount'),
    'ASTAR_BUDGET_S': ('path', 'budget_s'),
    'ASTAR_EXPANSION_CAP': ('path', 'expansion_cap'),
    'FMM_CELL': ('field', 'cell'),
    'FMM_EXACT_RADIUS': ('field', 'exact_radius'),
    'ALPHA': ('field', 'alpha'),
    'N_PRM': ('field', 'n_prm'),
    'K_PRM': ('field', 'k_prm'),
    'PRM_RETRIES': ('field', 'prm_retries'),
}


class PlannerSettings(BaseModel):
    """All parameter groups used by one planner configuration."""

    reward: RewardParams = Field(default_factory=RewardParams)
    kinematics: KinematicsParams = Field(default_factory=KinematicsParams)
    belief: BeliefParams = Field(default_factory=BeliefParams)
    rollout: RolloutConfig = Field(default_factory=RolloutConfig)
    solver: SolverConfig = Field(default_factory=SolverConfig)
    path: PathCostParams = Field(default_factory=PathCostParams)
    field: FieldParams = Field(default_factory=FieldParams)

    @classmethod
    def for_vehicle(cls, kind: VehicleKind) -> 'PlannerSettings':
        """Defaults for a vehicle type (Dubins: 4 m/s and the 19-heading A* action set)."""
        if kind is VehicleKind.DUBINS:
            return cls(
                reward=RewardParams(v_max=4.0),
                kinematics=KinematicsParams(kind=kind),
                path=PathCostParams(headings_deg=list(DUBINS_ASTAR_HEADINGS), heading_bucket_deg=5.0),
            )
        return cls()

    def with_overrides(self, mapping: Mapping[str, Optional[str]]) -> 'PlannerSettings':
        """Apply upper-case KEY=value overrides; unknown keys raise ConfigError."""
        groups = {name: getattr(self, name).model_dump() for name in type(self).model_fields}
        for key, raw in mapping.items():
            target = _OVERRIDE_KEYS.get(key.upper())
            if target is None:
                raise ConfigError(f"Unknown parameter key: {key}")
            group, name = target
            groups[group][name] = None if raw in (None, '') else raw
        try:
            return type(self).model_validate(groups)
        except ValidationError as e:
            raise ConfigError(f"Invalid parameter override: {e}") from e

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[str, Optional[str]], kind: VehicleKind = VehicleKind.HOLONOMIC
    ) -> 'PlannerSettings':
        return cls.for_vehicle(kind).with_overrides(mapping)

    @staticmethod
    def known_keys() -> List[str]:
        return sorted(_OVERRIDE_KEYS)
