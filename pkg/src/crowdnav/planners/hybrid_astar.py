"""Discrete-heading A* over continuous positions with static and pedestrian costs.

The path cost of a node reached after t steps is

    g = sum over steps of  step + lambda**t * (C_st(p_t) + C_ped(p_t))

and the heuristic is the straight-line distance to the goal region, which never
exceeds the remaining step cost because every step costs at least its length.
"""

import heapq
import logging
import math
import time
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import PathPlanningError
from ..models.params import PathCostParams, RewardParams
from ..models.state import VehicleState
from ..models.world import Environment
from ..services.belief_service import IntentionBelief
from ..utils.geometry import segment_clearance, wrap_angle

logger = logging.getLogger(__name__)


class PotentialMode(str, Enum):
    """How a pedestrian's intention uncertainty shapes its potential."""

    CURRENT_POSITION = "A"
    PREDICTED_PATH = "B"


@dataclass(frozen=True)
class PedPotentialField:
    """Union of cost disks with quadratic falloff to the disk edge."""

    centers: np.ndarray
    radii: np.ndarray
    height: float

    @classmethod
    def empty(cls, height: float = 0.0) -> 'PedPotentialField':
        return cls(np.zeros((0, 2)), np.zeros(0), height)

    def cost(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        if len(self.radii) == 0 or self.height == 0.0:
            return np.zeros(points.shape[:-1])
        d = np.linalg.norm(points[..., None, :] - self.centers, axis=-1)
        inside = np.clip(1.0 - d / self.radii, 0.0, None)
        return self.height * np.sum(inside * inside, axis=-1)


def entropy_mode(row: np.ndarray, threshold: float = 0.5) -> PotentialMode:
    """Mode A when the row's normalized entropy reaches the threshold, else mode B."""
    p = np.asarray(row, dtype=float)
    if len(p) <= 1:
        return PotentialMode.PREDICTED_PATH
    nz = p[p > 0]
    h = float(-np.sum(nz * np.log(nz)) / math.log(len(p)))
    return PotentialMode.CURRENT_POSITION if h >= threshold - 1e-12 else PotentialMode.PREDICTED_PATH


def build_potential_field(
    positions: np.ndarray, belief: IntentionBelief, params: PathCostParams, ped_speed: float = 1.0
) -> PedPotentialField:
    """Disks per pedestrian: one entropy-scaled disk (mode A) or a chain toward the likeliest goal (mode B)."""
    positions = np.asarray(positions, dtype=float).reshape(-1, 2)
    entropy = belief.entropy()
    likely = belief.most_likely()
    centers: List[np.ndarray] = []
    radii: List[float] = []
    for i, pos in enumerate(positions):
        if entropy_mode(belief.weights[i], params.entropy_threshold) is PotentialMode.CURRENT_POSITION:
            centers.append(pos)
            radii.append(params.mode_a_base + params.mode_a_scale * float(entropy[i]))
            continue
        to_goal = belief.goals[likely[i]] - pos
        dist = float(np.linalg.norm(to_goal))
        reach = min(ped_speed * params.mode_b_horizon_s, dist)
        unit = to_goal / dist if dist > 0 else np.zeros(2)
        for s in np.arange(0.0, reach + 1e-9, params.mode_b_spacing):
            centers.append(pos + unit * s)
            radii.append(params.mode_b_radius)
    if not centers:
        return PedPotentialField.empty(params.c_ped)
    return PedPotentialField(np.array(centers), np.array(radii), params.c_ped)


def static_cost(clearance: np.ndarray, d_obs: float, params: PathCostParams) -> np.ndarray:
    """Quadratic cost inside the band [d_obs, d_obs + st_margin) around obstacles."""
    depth = 1.0 - (clearance - d_obs) / params.st_margin
    return np.where((clearance >= d_obs) & (depth > 0), params.c_st * depth * depth, 0.0)


@dataclass(frozen=True)
class AStarPath:
    """Waypoints from the start to the goal region plus the heading of each leg."""

    waypoints: np.ndarray
    headings: np.ndarray
    turns_deg: np.ndarray
    cost: float
    expansions: int = 0
    reused: bool = False

    @property
    def length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        return float(np.sum(np.linalg.norm(np.diff(self.waypoints, axis=0), axis=1)))

    @property
    def is_empty(self) -> bool:
        return len(self.waypoints) < 2


@dataclass
class _SearchTree:
    x: List[float]
    y: List[float]
    theta: List[float]
    g: List[float]
    depth: List[int]
    parent: List[int]
    turn: List[float]

    def add(self, x: float, y: float, theta: float, g: float, depth: int, parent: int, turn: float) -> int:
        self.x.append(x)
        self.y.append(y)
        self.theta.append(theta)
        self.g.append(g)
        self.depth.append(depth)
        self.parent.append(parent)
        self.turn.append(turn)
        return len(self.x) - 1

    def path(self, leaf: int, goal_point: Tuple[float, float], turn: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        pts = [goal_point]
        turns = [turn]
        node = leaf
        while node >= 0:
            pts.append((self.x[node], self.y[node]))
            if self.parent[node] >= 0:
                turns.append(self.turn[node])
            node = self.parent[node]
        waypoints = np.array(pts[::-1])
        legs = np.diff(waypoints, axis=0)
        return waypoints, np.arctan2(legs[:, 1], legs[:, 0]), np.array(turns[::-1])


def plan_path(
    env: Environment,
    vehicle: VehicleState,
    field: PedPotentialField,
    params: PathCostParams,
    reward: Optional[RewardParams] = None,
    previous: Optional[AStarPath] = None,
) -> AStarPath:
    """Anytime weighted A* from the vehicle pose to within d_g of its goal.

    Runs one search per heuristic weight, pruning with the best complete path found so
    far. The budget is an expansion cap when configured, otherwise wall-clock time.
    On exhaustion without any path the previous path is reused.
    """
    reward = reward or RewardParams()
    goal = np.asarray(vehicle.goal, dtype=float)
    start = np.array([vehicle.x, vehicle.y])
    if np.linalg.norm(goal - start) <= reward.d_g:
        return AStarPath(start[None], np.zeros(0), np.zeros(0), 0.0)

    turns_deg = np.asarray(params.headings_deg, dtype=float)
    turns = np.radians(turns_deg)
    bucket = math.radians(params.heading_bucket_deg)
    n_buckets = max(1, int(round(2 * math.pi / bucket)))
    t0 = time.perf_counter()
    expansions = 0
    best_cost = math.inf
    best: Optional[Tuple[np.ndarray, np.ndarray, np.ndarray]] = None

    def heuristic(px: np.ndarray, py: np.ndarray) -> np.ndarray:
        return np.maximum(0.0, np.hypot(goal[0] - px, goal[1] - py) - reward.d_g)

    def out_of_budget() -> bool:
        if params.expansion_cap is not None:
            return expansions >= params.expansion_cap
        return time.perf_counter() - t0 >= params.budget_s

    exhausted = False
    for weight in params.weights:
        tree = _SearchTree([], [], [], [], [], [], [])
        root = tree.add(float(start[0]), float(start[1]), float(vehicle.theta), 0.0, 0, -1, 0.0)
        h0 = float(heuristic(start[0], start[1]))
        open_heap: List[Tuple[float, int]] = [(weight * h0, root)]
        best_g: Dict[Tuple[int, int, int], float] = {}
        closed = set()
        while open_heap:
            if out_of_budget():
                exhausted = True
                break
            _, node = heapq.heappop(open_heap)
            x, y, th, g, t = tree.x[node], tree.y[node], tree.theta[node], tree.g[node], tree.depth[node]
            key = (int(math.floor(x)), int(math.floor(y)), int(round(th / bucket)) % n_buckets)
            if key in closed:
                continue
            closed.add(key)
            if g + float(heuristic(x, y)) >= best_cost:
                continue
            expansions += 1

            nth = wrap_angle(th + turns)
            nx = x + params.step * np.cos(nth)
            ny = y + params.step * np.sin(nth)
            pts = np.stack([nx, ny], axis=-1)
            inside = (nx >= 0) & (nx <= env.width) & (ny >= 0) & (ny <= env.height)
            seg = segment_clearance(env, np.array([x, y]), pts)
            ok = inside & (seg >= reward.d_obs)
            if not ok.any():
                continue
            step_cost = params.step + params.discount ** (t + 1) * (
                static_cost(env.clearance_array(pts), reward.d_obs, params) + field.cost(pts)
            )
            ng = g + step_cost
            nh = heuristic(nx, ny)
            at_goal = np.hypot(goal[0] - nx, goal[1] - ny) <= reward.d_g
            for a in np.flatnonzero(ok):
                cost = float(ng[a])
                if at_goal[a]:
                    if cost < best_cost:
                        best_cost = cost
                        best = tree.path(node, (float(nx[a]), float(ny[a])), float(turns_deg[a]))
                    continue
                if cost + float(nh[a]) >= best_cost:
                    continue
                skey = (int(math.floor(nx[a])), int(math.floor(ny[a])), int(round(nth[a] / bucket)) % n_buckets)
                if skey in closed or cost >= best_g.get(skey, math.inf):
                    continue
                best_g[skey] = cost
                child = tree.add(float(nx[a]), float(ny[a]), float(nth[a]), cost, t + 1, node, float(turns_deg[a]))
                heapq.heappush(open_heap, (cost + weight * float(nh[a]), child))
        if exhausted:
            break

    if best is None:
        if previous is not None and not previous.is_empty:
            logger.debug(f"A* found no path in {expansions} expansions; reusing previous path")
            return replace(previous, reused=True, expansions=expansions)
        raise PathPlanningError(f"no path to {tuple(goal)} after {expansions} expansions")
    waypoints, headings, turn_list = best
    return AStarPath(waypoints, headings, turn_list, best_cost, expansions)
