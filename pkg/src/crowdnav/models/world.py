"""Static environment models: field, obstacles, goals."""

from enum import Enum
from typing import List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

Point = Tuple[float, float]


class ScenarioId(str, Enum):
    """Checked-in environment layouts."""

    OPEN_FIELD = "OPEN_FIELD"
    SCATTERED = "SCATTERED"
    L_LOBBY = "L_LOBBY"


class CircularObstacle(BaseModel):
    """Static disk obstacle."""

    model_config = ConfigDict(frozen=True)

    center: Point = Field(..., description="Disk center (m)")
    radius: float = Field(..., gt=0, description="Disk radius (m)")


class Environment(BaseModel):
    """Static environment shared by planners and the simulator."""

    model_config = ConfigDict(frozen=True)

    name: str = Field("custom", description="Scenario tag or free-form name")
    width: float = Field(100.0, gt=0, description="Field width (m)")
    height: float = Field(100.0, gt=0, description="Field height (m)")
    obstacles: List[CircularObstacle] = Field(default_factory=list, description="Static obstacles")
    pedestrian_goals: List[Point] = Field(..., min_length=1, description="Candidate pedestrian goals (m)")
    vehicle_goal: Point = Field((90.0, 90.0), description="Vehicle goal (m)")
    vehicle_start: Point = Field((10.0, 10.0), description="Vehicle start (m)")

    @model_validator(mode='after')
    def _check_geometry(self) -> 'Environment':
        for obstacle in self.obstacles:
            cx, cy = obstacle.center
            r = obstacle.radius
            if cx - r < 0 or cy - r < 0 or cx + r > self.width or cy + r > self.height:
                raise ValueError(f"obstacle at {obstacle.center} r={r} leaves the field")
        for label, point in [('vehicle goal', self.vehicle_goal), ('vehicle start', self.vehicle_start)] + [
            ('pedestrian goal', g) for g in self.pedestrian_goals
        ]:
            if not self.contains(point):
                raise ValueError(f"{label} {point} is outside the field")
            if self.obstacle_clearance(point) <= 0:
                raise ValueError(f"{label} {point} lies inside an obstacle")
        return self

    @property
    def obstacle_centers(self) -> np.ndarray:
        """Obstacle centers as an (m, 2) array."""
        return np.array([o.center for o in self.obstacles], dtype=float).reshape(-1, 2)

    @property
    def obstacle_radii(self) -> np.ndarray:
        """Obstacle radii as an (m,) array."""
        return np.array([o.radius for o in self.obstacles], dtype=float)

    @property
    def goal_array(self) -> np.ndarray:
        """Pedestrian goals as a (G, 2) array."""
        return np.array(self.pedestrian_goals, dtype=float).reshape(-1, 2)

    def contains(self, p: Point) -> bool:
        """Check whether a point lies inside the (closed) field."""
        return 0.0 <= p[0] <= self.width and 0.0 <= p[1] <= self.height

    def obstacle_clearance(self, p: Point) -> float:
        """Distance from p to the nearest obstacle boundary; negative inside, +inf with no obstacles."""
        return float(self.clearance_array(np.asarray(p, dtype=float)))

    def clearance_array(self, points: np.ndarray) -> np.ndarray:
        """Vectorized obstacle clearance over points of shape (..., 2)."""
        points = np.asarray(points, dtype=float)
        if not self.obstacles:
            return np.full(points.shape[:-1], np.inf)
        diff = points[..., None, :] - self.obstacle_centers
        dist = np.sqrt(np.sum(diff * diff, axis=-1)) - self.obstacle_radii
        return np.min(dist, axis=-1)

    def clip_to_field(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Clamp coordinates into the field rectangle."""
        return np.clip(x, 0.0, self.width), np.clip(y, 0.0, self.height)
