"""Scenario catalog and static-world queries."""

import logging
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from dotenv import dotenv_values
from pydantic import ValidationError

from ..config import app_config
from ..exceptions import ScenarioError
from ..models.state import POMDPState
from ..models.world import CircularObstacle, Environment, ScenarioId

logger = logging.getLogger(__name__)

_SCENARIO_FILES = {
    ScenarioId.OPEN_FIELD: 'open_field.conf',
    ScenarioId.SCATTERED: 'scattered.conf',
    ScenarioId.L_LOBBY: 'l_lobby.conf',
}


def read_key_values(path: Path) -> Dict[str, Optional[str]]:
    """Parse a KEY=value file (comments with #)."""
    if not path.exists():
        raise FileNotFoundError(f"Config file not found: {path}")
    return dict(dotenv_values(path))


def parse_points(raw: Optional[str]) -> List[Tuple[float, float]]:
    """'x,y;x,y' -> [(x, y), ...]."""
    return [(float(x), float(y)) for x, y in _split_items(raw, 2)]


def parse_obstacles(raw: Optional[str]) -> List[CircularObstacle]:
    """'cx,cy,r;cx,cy,r' -> [CircularObstacle, ...]."""
    return [
        CircularObstacle(center=(float(cx), float(cy)), radius=float(r))
        for cx, cy, r in _split_items(raw, 3)
    ]


def _split_items(raw: Optional[str], arity: int) -> List[List[str]]:
    items = []
    for chunk in (raw or '').split(';'):
        if not chunk.strip():
            continue
        parts = [p.strip() for p in chunk.split(',')]
        if len(parts) != arity:
            raise ScenarioError(f"Expected {arity} comma-separated values, got '{chunk}'")
        items.append(parts)
    return items


def environment_from_mapping(values: Mapping[str, Optional[str]]) -> Environment:
    """Build an Environment from scenario file keys."""
    try:
        start = parse_points(values.get('VEHICLE_START') or '10,10')
        goal = parse_points(values.get('VEHICLE_GOAL') or '90,90')
        return Environment(
            name=values.get('NAME') or 'custom',
            width=float(values.get('FIELD_WIDTH') or 100),
            height=float(values.get('FIELD_HEIGHT') or 100),
            obstacles=parse_obstacles(values.get('OBSTACLES')),
            pedestrian_goals=parse_points(values.get('PEDESTRIAN_GOALS')),
            vehicle_start=start[0],
            vehicle_goal=goal[0],
        )
    except (ValidationError, ValueError, IndexError) as e:
        raise ScenarioError(f"Invalid scenario geometry: {e}") from e


class ScenarioService:
    """Loads checked-in scenario geometry."""

    def __init__(self, scenario_dir: Optional[Path] = None) -> None:
        self.scenario_dir = Path(scenario_dir or app_config.scenario_dir)

    def build_scenario(self, scenario_id: ScenarioId | str) -> Environment:
        """Return the fixed environment for a scenario tag."""
        try:
            tag = ScenarioId(scenario_id)
        except ValueError as e:
            raise ScenarioError(f"Unknown scenario: {scenario_id}") from e
        return _load_cached(str(self.scenario_dir / _SCENARIO_FILES[tag]))

    def load_file(self, path: Path) -> Environment:
        return _load_cached(str(path))


@lru_cache(maxsize=32)
def _load_cached(path: str) -> Environment:
    env = environment_from_mapping(read_key_values(Path(path)))
    logger.debug(f"Loaded scenario {env.name} with {len(env.obstacles)} obstacles from {path}")
    return env


def build_scenario(scenario_id: ScenarioId | str) -> Environment:
    return get_scenario_service().build_scenario(scenario_id)


def obstacle_clearance(env: Environment, p: Tuple[float, float]) -> float:
    return env.obstacle_clearance(p)


def nearest_indices(origin: Sequence[float], positions: np.ndarray, n: int) -> List[int]:
    """Indices of the n positions closest to origin; ties broken by lower index."""
    if n <= 0 or len(positions) == 0:
        return []
    d = np.hypot(positions[:, 0] - origin[0], positions[:, 1] - origin[1])
    order = np.argsort(d, kind='stable')
    return [int(i) for i in order[:n]]


def nearest_pedestrians(state: POMDPState, n: int) -> List[int]:
    """Indices of the n pedestrians nearest to the vehicle, ascending by distance."""
    return nearest_indices(state.vehicle.position, state.pedestrian_positions(), n)


# Global scenario service instance
_scenario_service: Optional[ScenarioService] = None


def get_scenario_service() -> ScenarioService:
    """Get the global scenario service instance."""
    global _scenario_service
    if _scenario_service is None:
        _scenario_service = ScenarioService()
    return _scenario_service
