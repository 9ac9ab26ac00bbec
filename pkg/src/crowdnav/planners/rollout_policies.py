"""Heading sources and the reactive roll-out controller.

A heading source answers "which way to the goal from here" for a batch of
positions, plus the remaining path length used by the search upper bound.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional, Protocol, Tuple, Union

import numpy as np

from ..models.params import KinematicsParams, PathSource, RewardParams, RolloutConfig, VehicleKind
from ..models.state import NavAction, POMDPState, ScenarioParticle, VehicleState
from ..models.world import Environment
from ..services.pomdp_service import (
    ParticleBatch,
    dubins_turn_limit,
    min_pedestrian_distance,
    sample_ped_noise,
    transition,
)
from ..utils.geometry import wrap_angle
from .fmm_planner import TravelTimeGrid, next_heading_batch
from .hybrid_astar import AStarPath
from .prm_planner import Roadmap, query_batch

logger = logging.getLogger(__name__)

Number = Union[float, np.ndarray]


class HeadingSource(Protocol):
    """Multi-query path generator."""

    kind: PathSource

    def heading_batch(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(headings, valid) for positions; invalid entries are dead states."""
        ...

    def path_length_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Remaining path length to the goal; +inf where unknown."""
        ...


@dataclass(frozen=True)
class FmmHeadingSource:
    field: TravelTimeGrid
    alpha: float = 1.0
    kind: PathSource = PathSource.FMM

    def heading_batch(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return next_heading_batch(self.field, np.stack([x, y], axis=-1), self.alpha)

    def path_length_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        pts = np.stack([x, y], axis=-1)
        t = self.field.time_at(pts)
        i, j, _ = self.field.cells_of(pts)
        in_source = (i == self.field.source[0]) & (j == self.field.source[1])
        direct = np.hypot(self.field.source_point[0] - x, self.field.source_point[1] - y)
        # T is exact at cell centers only; stay optimistic within the cell
        slack = self.field.cell * math.sqrt(2.0) / 2.0
        return np.where(in_source, direct, np.maximum(t - slack, 0.0))


@dataclass(frozen=True)
class PrmHeadingSource:
    roadmap: Roadmap
    env: Environment
    margin: float = 1.0
    kind: PathSource = PathSource.PRM

    def heading_batch(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        q = query_batch(self.roadmap, self.env, np.stack([x, y], axis=-1), self.margin)
        return q.heading, q.valid

    def path_length_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return query_batch(self.roadmap, self.env, np.stack([x, y], axis=-1), self.margin).length


@dataclass(frozen=True)
class AStarPathSource:
    """Follows a fixed hybrid A* path: aim at the waypoint after the nearest one."""

    path: AStarPath
    goal: Tuple[float, float]
    kind: PathSource = PathSource.ASTAR_PATH

    def _nearest(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        wp = self.path.waypoints
        d = np.hypot(wp[None, :, 0] - x[:, None], wp[None, :, 1] - y[:, None])
        idx = np.argmin(d, axis=1)
        return idx, d[np.arange(len(x)), idx]

    def heading_batch(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        wp = self.path.waypoints
        idx, _ = self._nearest(x, y)
        nxt = idx + 1
        target = np.where((nxt < len(wp))[:, None], wp[np.minimum(nxt, len(wp) - 1)], np.asarray(self.goal))
        heading = np.arctan2(target[:, 1] - y, target[:, 0] - x)
        return heading, np.ones(len(x), dtype=bool)

    def path_length_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        wp = self.path.waypoints
        legs = np.linalg.norm(np.diff(wp, axis=0), axis=1) if len(wp) > 1 else np.zeros(0)
        remaining = np.concatenate([np.cumsum(legs[::-1])[::-1], [0.0]])
        tail = float(np.hypot(self.goal[0] - wp[-1, 0], self.goal[1] - wp[-1, 1]))
        idx, d = self._nearest(x, y)
        return d + remaining[idx] + tail


@dataclass(frozen=True)
class StraightLineSource:
    """Head straight at the goal; the turn limit is applied by the controller."""

    goal: Tuple[float, float]
    kind: PathSource = PathSource.STRAIGHT_LINE_DUBINS

    def heading_batch(self, x: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.atleast_1d(x)
        y = np.atleast_1d(y)
        return np.arctan2(self.goal[1] - y, self.goal[0] - x), np.ones(len(x), dtype=bool)

    def path_length_batch(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return np.hypot(self.goal[0] - np.atleast_1d(x), self.goal[1] - np.atleast_1d(y))


def reactive_speed(v: Number, d_min: Number, cfg: RolloutConfig, v_max: float = 2.0) -> Number:
    """Speed up by 1 m/s when nobody is within d_far, slow down by 1 m/s inside d_near."""
    v_arr = np.asarray(v, dtype=float)
    d_arr = np.asarray(d_min, dtype=float)
    out = np.where(
        d_arr > cfg.d_far,
        np.minimum(v_arr + 1.0, v_max),
        np.where(d_arr < cfg.d_near, np.maximum(v_arr - 1.0, 0.0), v_arr),
    )
    return out if np.ndim(out) else float(out)


def steering_change(
    heading: np.ndarray, theta: np.ndarray, v: np.ndarray, kin: KinematicsParams, dt: float
) -> np.ndarray:
    """Heading change toward the requested heading, saturated for the Dubins vehicle."""
    dtheta = wrap_angle(heading - theta)
    if kin.kind is VehicleKind.DUBINS:
        limit = kin.max_curvature * np.maximum(v, 1.0) * dt
        dtheta = np.clip(dtheta, -limit, limit)
    return dtheta


def delta_ro(
    src: HeadingSource,
    vehicle: VehicleState,
    kin: Optional[KinematicsParams] = None,
    params: Optional[RewardParams] = None,
) -> float:
    """Heading change that follows the source at the vehicle's position; 0 in a dead state."""
    kin = kin or KinematicsParams()
    params = params or RewardParams()
    heading, valid = src.heading_batch(np.array([vehicle.x]), np.array([vehicle.y]))
    if not valid[0]:
        logger.debug(f"No roll-out heading at ({vehicle.x:.2f}, {vehicle.y:.2f}); keeping heading")
        return 0.0
    if kin.kind is VehicleKind.DUBINS:
        limit = dubins_turn_limit(vehicle.v, kin, params.dt)
        return float(np.clip(wrap_angle(heading[0] - vehicle.theta), -limit, limit))
    return float(wrap_angle(heading[0] - vehicle.theta))


def rollout_batch(
    batch: ParticleBatch,
    src: HeadingSource,
    cfg: RolloutConfig,
    params: RewardParams,
    kin: KinematicsParams,
    env: Optional[Environment] = None,
) -> np.ndarray:
    """Discounted roll-out return per particle, counted from the batch's own depth.

    Particles already inside the goal region are worth r_goal. Dead states stop the
    roll-out with no further reward; terminal transitions stop it after their reward.
    """
    values = np.zeros(batch.size)
    if cfg.m_steps == 0 or batch.size == 0:
        return values
    at_goal = batch.goal_distance() <= params.d_g
    values[at_goal] = params.r_goal
    cur = batch.take(~at_goal)
    cur_idx = np.flatnonzero(~at_goal)
    discount = 1.0
    for _ in range(cfg.m_steps):
        if cur.size == 0:
            break
        heading, valid = src.heading_batch(cur.x, cur.y)
        if not valid.all():
            cur = cur.take(valid)
            cur_idx = cur_idx[valid]
            heading = heading[valid]
            if cur.size == 0:
                break
        v_new = reactive_speed(cur.v, cur.nearest_pedestrian_distance(), cfg, params.v_max)
        dtheta = steering_change(heading, cur.theta, cur.v, kin, params.dt)
        nxt, r, terminal = cur.step(dtheta, v_new - cur.v, np.zeros(cur.size, dtype=bool), params, kin, env)
        values[cur_idx] += discount * r
        discount *= params.gamma
        cur = nxt.take(~terminal)
        cur_idx = cur_idx[~terminal]
    return values


def rollout_value(
    particle: ScenarioParticle,
    src: HeadingSource,
    cfg: RolloutConfig,
    params: RewardParams,
    kin: Optional[KinematicsParams] = None,
    env: Optional[Environment] = None,
    depth: int = 0,
) -> float:
    """Roll-out return of one scenario particle starting at tree depth `depth`."""
    kin = kin or KinematicsParams()
    batch = ParticleBatch.from_particles([particle], depth + cfg.m_steps, kin, depth=depth)
    return float(rollout_batch(batch, src, cfg, params, kin, env)[0])


class RolloutPolicy:
    """The roll-out controller as a state -> action policy."""

    def __init__(
        self,
        src: HeadingSource,
        cfg: RolloutConfig,
        params: RewardParams,
        kin: Optional[KinematicsParams] = None,
    ) -> None:
        self.src = src
        self.cfg = cfg
        self.params = params
        self.kin = kin or KinematicsParams()

    def __call__(self, state: POMDPState) -> NavAction:
        return self.act(state)

    def act(self, state: POMDPState) -> NavAction:
        veh = state.vehicle
        d_min = min_pedestrian_distance(np.array([veh.x]), np.array([veh.y]), state.pedestrian_positions()[None])
        v_new = reactive_speed(veh.v, float(d_min[0]), self.cfg, self.params.v_max)
        return NavAction.steer(delta_ro(self.src, veh, self.kin, self.params), float(v_new) - veh.v)


Policy = Callable[[POMDPState], NavAction]


def simulate_policy(
    policy: Policy,
    state: POMDPState,
    rng: np.random.Generator,
    horizon: int,
    params: RewardParams,
    kin: Optional[KinematicsParams] = None,
    env: Optional[Environment] = None,
) -> float:
    """Discounted return of executing a policy in the generative model for up to `horizon` steps."""
    kin = kin or KinematicsParams()
    if horizon <= 0:
        return 0.0
    if state.vehicle.distance_to_goal() <= params.d_g:
        return params.r_goal
    total = 0.0
    discount = 1.0
    s = state
    for _ in range(horizon):
        action = policy(s)
        noise = sample_ped_noise(rng, (len(s.pedestrians),), kin)
        s, _, r = transition(s, action, noise, params, kin, env)
        total += discount * r
        discount *= params.gamma
        if _is_terminal(s, params, env):
            break
    return total


def _is_terminal(s: POMDPState, params: RewardParams, env: Optional[Environment]) -> bool:
    veh = s.vehicle
    if veh.distance_to_goal() <= params.d_g:
        return True
    if env is not None and env.obstacle_clearance(veh.position) < 0.0:
        return True
    d = min_pedestrian_distance(np.array([veh.x]), np.array([veh.y]), s.pedestrian_positions()[None])
    return bool(veh.v > 0.0 and d[0] < params.d_ped)
