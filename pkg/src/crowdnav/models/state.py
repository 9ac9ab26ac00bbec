"""Hot-path value types for the navigation POMDP.

These are plain slotted dataclasses rather than pydantic models: they are created
millions of times per experiment inside tree search and roll-outs.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

Cell = Tuple[int, int]


@dataclass(frozen=True, slots=True)
class VehicleState:
    """Vehicle pose, speed and goal."""

    x: float
    y: float
    theta: float
    v: float
    goal: Tuple[float, float]

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)

    def distance_to_goal(self) -> float:
        return float(np.hypot(self.goal[0] - self.x, self.goal[1] - self.y))


@dataclass(frozen=True, slots=True)
class PedestrianState:
    """Pedestrian position, preferred speed and intended goal."""

    x: float
    y: float
    v: float
    goal: Tuple[float, float]

    @property
    def position(self) -> Tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class POMDPState:
    """Joint state: the vehicle plus the tracked pedestrians."""

    vehicle: VehicleState
    pedestrians: Tuple[PedestrianState, ...] = ()

    def pedestrian_positions(self) -> np.ndarray:
        return np.array([p.position for p in self.pedestrians], dtype=float).reshape(-1, 2)

    def pedestrian_speeds(self) -> np.ndarray:
        return np.array([p.v for p in self.pedestrians], dtype=float)

    def pedestrian_goals(self) -> np.ndarray:
        return np.array([p.goal for p in self.pedestrians], dtype=float).reshape(-1, 2)


class ActionKind(str, Enum):
    STEER_SPEED = "STEER_SPEED"
    SUDDEN_BRAKE = "SUDDEN_BRAKE"


@dataclass(frozen=True, slots=True)
class NavAction:
    """Heading change plus speed change, or a sudden brake."""

    kind: ActionKind
    dtheta: float = 0.0
    ds: float = 0.0

    @classmethod
    def steer(cls, dtheta: float, ds: float) -> 'NavAction':
        return cls(ActionKind.STEER_SPEED, float(dtheta), float(ds))

    @classmethod
    def sudden_brake(cls) -> 'NavAction':
        return cls(ActionKind.SUDDEN_BRAKE)

    @property
    def is_brake(self) -> bool:
        return self.kind is ActionKind.SUDDEN_BRAKE

    @property
    def sort_key(self) -> Tuple[int, float, float]:
        """Lexicographic order used for tie-breaking: steering actions before SB."""
        return (1 if self.is_brake else 0, self.ds, self.dtheta)

    def to_dict(self) -> dict[str, object]:
        return {'kind': self.kind.value, 'dtheta': round(self.dtheta, 6), 'ds': self.ds}


@dataclass(frozen=True, slots=True)
class NavObservation:
    """Discretized vehicle and pedestrian positions."""

    vehicle_cell: Cell
    pedestrian_cells: Tuple[Cell, ...] = field(default_factory=tuple)


@dataclass(frozen=True, slots=True)
class ScenarioParticle:
    """A determinized scenario: concrete pedestrian goals plus the seed of its noise stream."""

    state: POMDPState
    seed: int
