"""Data models for the crowdnav application."""

from .experiment import (
    CSV_COLUMNS,
    EpisodeResult,
    ExperimentSpec,
    MetricsRow,
    MetricsTable,
    Outcome,
    PlannerKind,
    PolicyValueEstimate,
)
from .params import (
    BeliefParams,
    FieldParams,
    KinematicsParams,
    PathCostParams,
    PathSource,
    PlannerSettings,
    RewardParams,
    RolloutConfig,
    SolverConfig,
    VehicleKind,
)
from .state import (
    ActionKind,
    NavAction,
    NavObservation,
    PedestrianState,
    POMDPState,
    ScenarioParticle,
    VehicleState,
)
from .world import CircularObstacle, Environment, ScenarioId

__all__ = [
    'ActionKind', 'BeliefParams', 'CSV_COLUMNS', 'CircularObstacle', 'Environment', 'EpisodeResult',
    'ExperimentSpec', 'FieldParams', 'KinematicsParams', 'MetricsRow', 'MetricsTable', 'NavAction',
    'NavObservation', 'Outcome', 'PathCostParams', 'PathSource', 'PedestrianState', 'PlannerKind',
    'PlannerSettings', 'POMDPState', 'PolicyValueEstimate', 'RewardParams', 'RolloutConfig',
    'ScenarioId', 'ScenarioParticle', 'SolverConfig', 'VehicleKind', 'VehicleState',
]
