"""Experiment, episode and metrics records."""

from enum import Enum
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field

from .params import VehicleKind
from .world import ScenarioId


class PlannerKind(str, Enum):
    """Planner configurations compared in experiments."""

    LS_ASTAR = "LS_ASTAR"
    ES_FMM = "ES_FMM"
    ES_PRM = "ES_PRM"
    ES_NHV_STRAIGHT = "ES_NHV_STRAIGHT"


class Outcome(str, Enum):
    GOAL = "GOAL"
    TIMEOUT = "TIMEOUT"
    PLANNER_FAILURE = "PLANNER_FAILURE"


CSV_COLUMNS = [
    'scenario', 'vehicle', 'planner', 'population', 'trial', 'seed',
    'travel_time_s', 'sb_count', 'unsafe', 'outcome',
]


class EpisodeResult(BaseModel):
    """Outcome of one simulated episode."""

    scenario: str = Field(..., description="Scenario tag")
    vehicle: VehicleKind = Field(VehicleKind.HOLONOMIC, description="Vehicle model")
    planner: PlannerKind = Field(..., description="Planner configuration")
    population: int = Field(..., ge=0, description="Pedestrians in the world")
    trial: int = Field(0, ge=0, description="Trial index within the experiment cell")
    seed: int = Field(..., description="World seed shared by paired planners")
    travel_time_s: float = Field(..., ge=0, description="Simulated time until the episode ended")
    sb_count: int = Field(0, ge=0, description="Sudden brakes executed")
    unsafe: bool = Field(False, description="Moving vehicle came within the safety radius")
    outcome: Outcome = Field(..., description="How the episode ended")
    steps: int = Field(0, ge=0, description="Executed steps")
    failure_message: Optional[str] = Field(None, description="Planner error for PLANNER_FAILURE")
    trajectory: List[Dict[str, Any]] = Field(default_factory=list, description="Per-step log records")

    def csv_row(self) -> Dict[str, Any]:
        """One row of the raw results CSV."""
        return {
            'scenario': self.scenario,
            'vehicle': self.vehicle.value,
            'planner': self.planner.value,
            'population': self.population,
            'trial': self.trial,
            'seed': self.seed,
            'travel_time_s': round(self.travel_time_s, 3),
            'sb_count': self.sb_count,
            'unsafe': int(self.unsafe),
            'outcome': self.outcome.value,
        }


class ExperimentSpec(BaseModel):
    """Batch experiment definition."""

    scenario: ScenarioId = Field(ScenarioId.OPEN_FIELD, description="Environment layout")
    vehicle: VehicleKind = Field(VehicleKind.HOLONOMIC, description="Vehicle model")
    planners: List[PlannerKind] = Field(..., min_length=1, description="Planners to compare")
    populations: List[int] = Field(..., min_length=1, description="Crowd sizes")
    trials: int = Field(1, ge=1, description="Paired trials per (population, planner)")
    base_seed: int = Field(0, description="Seed all trial seeds derive from")
    budget_s: float = Field(0.5, gt=0, description="ES decision budget (s); LS splits it 0.15/0.35")
    iteration_cap: Optional[int] = Field(None, ge=1, description="Deterministic search cap")
    step_limit: int = Field(600, ge=1, description="Episode timeout in steps")
    baseline: PlannerKind = Field(PlannerKind.LS_ASTAR, description="Planner others are compared to")
    overrides: Dict[str, str] = Field(default_factory=dict, description="Parameter overrides (KEY=value)")


class MetricsRow(BaseModel):
    """Aggregated metrics for one (scenario, population, planner) cell."""

    scenario: str
    vehicle: str
    population: int
    planner: str
    trials: int
    completed: int
    failures: int
    timeouts: int
    unsafe: int
    mean_travel_time_s: float
    sem_travel_time_s: float
    mean_sb: float
    sem_sb: float
    outperform: Optional[int] = Field(None, description="Strict travel-time wins over the baseline")
    travel_time_ratio: Optional[float] = Field(None, description="Mean travel time relative to the baseline")


class MetricsTable(BaseModel):
    """Results table shaped like the travel-time / SB comparison tables."""

    baseline: PlannerKind
    rows: List[MetricsRow] = Field(default_factory=list)

    def row(self, population: int, planner: PlannerKind) -> MetricsRow:
        for r in self.rows:
            if r.population == population and r.planner == planner.value:
                return r
        raise KeyError(f"no metrics for population={population} planner={planner.value}")

    def to_text(self) -> str:
        lines = [f"{'pop':>5} {'planner':<16} {'travel time (s)':>18} {'# SB':>14} {'# outperf':>10} {'unsafe':>7} {'fail':>5}"]
        for r in self.rows:
            outperf = '-' if r.outperform is None else f"{r.outperform}/{r.completed}"
            lines.append(
                f"{r.population:>5} {r.planner:<16} "
                f"{r.mean_travel_time_s:>9.2f} ± {r.sem_travel_time_s:<6.2f} "
                f"{r.mean_sb:>6.2f} ± {r.sem_sb:<5.2f} {outperf:>10} {r.unsafe:>7} {r.failures:>5}"
            )
        return "\n".join(lines)


class PolicyValueEstimate(BaseModel):
    """Monte Carlo estimate of a policy's value at a belief."""

    belief_id: str = Field(..., description="Deterministic id of (belief, state, seed)")
    value: float = Field(..., description="Mean discounted return")
    sem: float = Field(..., ge=0, description="Standard error of the mean")
    horizon: int = Field(..., ge=0, description="Simulated steps per roll-out")
    rollouts: int = Field(..., ge=1, description="Number of roll-outs")
