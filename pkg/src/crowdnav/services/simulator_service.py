"""Ground-truth crowd simulator and the plan-act-observe episode loop."""

import logging
from dataclasses import dataclass, replace
from typing import Any, Dict, List, Optional, Protocol, Tuple

import numpy as np

from ..models.experiment import EpisodeResult, Outcome, PlannerKind
from ..models.params import KinematicsParams, PlannerSettings, RewardParams
from ..models.state import NavAction, PedestrianState, POMDPState, VehicleState
from ..models.world import Environment
from ..utils.seed_utils import derive_seed
from .belief_service import BeliefTracker
from .planner_service import NavigationPlanner, PlannerInput, create_planner
from .pomdp_service import min_pedestrian_distance, sample_ped_noise, step_pedestrian_arrays, step_vehicle
from .scenario_service import nearest_indices

logger = logging.getLogger(__name__)

# Edges in spawn order: bottom, right, top, left.
_EDGES = ('bottom', 'right', 'top', 'left')
_OPPOSITE = {'bottom': 'top', 'top': 'bottom', 'left': 'right', 'right': 'left'}


@dataclass(frozen=True)
class WorldState:
    """Vehicle plus the full pedestrian population, stored column-wise."""

    vehicle: VehicleState
    ped_ids: np.ndarray
    ped_pos: np.ndarray
    ped_speed: np.ndarray
    ped_goal: np.ndarray
    elapsed: float = 0.0
    step: int = 0
    seed: int = 0
    next_id: int = 0

    @property
    def population(self) -> int:
        return int(self.ped_ids.shape[0])


class PedestrianModel(Protocol):
    """Moves the population one step toward its goals."""

    def step(self, pos: np.ndarray, speed: np.ndarray, goal: np.ndarray, rng: np.random.Generator, dt: float) -> np.ndarray:
        ...


class GoalDirectedPedestrianModel:
    """Straight-line walking with truncated Gaussian step noise, as in the planning model."""

    def __init__(self, kin: Optional[KinematicsParams] = None) -> None:
        self.kin = kin or KinematicsParams()

    def step(self, pos: np.ndarray, speed: np.ndarray, goal: np.ndarray, rng: np.random.Generator, dt: float) -> np.ndarray:
        noise = sample_ped_noise(rng, (len(pos),), self.kin)
        return step_pedestrian_arrays(pos, speed, goal, noise, dt)


def _edge_point(env: Environment, edge: str, u: float) -> Tuple[float, float]:
    if edge == 'bottom':
        return (u * env.width, 0.0)
    if edge == 'top':
        return (u * env.width, env.height)
    if edge == 'left':
        return (0.0, u * env.height)
    return (env.width, u * env.height)


def _edge_distance(env: Environment, edge: str, points: np.ndarray) -> np.ndarray:
    if edge == 'bottom':
        return np.abs(points[:, 1])
    if edge == 'top':
        return np.abs(points[:, 1] - env.height)
    if edge == 'left':
        return np.abs(points[:, 0])
    return np.abs(points[:, 0] - env.width)


def spawn_pedestrian(env: Environment, rng: np.random.Generator) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """Uniform point on a random edge, with a goal picked from the two goals nearest the opposite edge."""
    edge = _EDGES[int(rng.integers(0, 4))]
    pos = _edge_point(env, edge, float(rng.random()))
    goals = env.goal_array
    candidates = np.argsort(_edge_distance(env, _OPPOSITE[edge], goals), kind='stable')[:2]
    g = goals[candidates[int(rng.integers(0, len(candidates)))]]
    return pos, (float(g[0]), float(g[1]))


def initial_world(
    env: Environment,
    population: int,
    rng: np.random.Generator,
    kin: Optional[KinematicsParams] = None,
    seed: int = 0,
) -> WorldState:
    """Vehicle at rest at its start facing the goal; pedestrians uniform in free space."""
    kin = kin or KinematicsParams()
    pos = np.zeros((0, 2))
    while len(pos) < population:
        batch = rng.uniform((0.0, 0.0), (env.width, env.height), size=(2 * (population - len(pos)) + 4, 2))
        pos = np.vstack([pos, batch[env.clearance_array(batch) > 0.0]])
    pos = pos[:population]
    goals = env.goal_array[rng.integers(0, len(env.pedestrian_goals), size=population)]
    sx, sy = env.vehicle_start
    gx, gy = env.vehicle_goal
    vehicle = VehicleState(sx, sy, float(np.arctan2(gy - sy, gx - sx)), 0.0, env.vehicle_goal)
    return WorldState(
        vehicle=vehicle,
        ped_ids=np.arange(population, dtype=np.int64),
        ped_pos=pos.reshape(-1, 2),
        ped_speed=np.full(population, kin.ped_speed),
        ped_goal=goals.reshape(-1, 2),
        seed=seed,
        next_id=population,
    )


def step_world(
    w: WorldState,
    a: NavAction,
    rng: np.random.Generator,
    env: Environment,
    params: Optional[RewardParams] = None,
    kin: Optional[KinematicsParams] = None,
    model: Optional[PedestrianModel] = None,
) -> WorldState:
    """Advance one step; arrivals are removed and replaced by edge spawns appended at the end."""
    params = params or RewardParams()
    kin = kin or KinematicsParams()
    model = model or GoalDirectedPedestrianModel(kin)
    vehicle = step_vehicle(w.vehicle, a, params, kin, env)
    pos = model.step(w.ped_pos, w.ped_speed, w.ped_goal, rng, params.dt)

    arrived = np.linalg.norm(pos - w.ped_goal, axis=1) <= 1e-6
    keep = ~arrived
    ids, speed, goal = w.ped_ids[keep], w.ped_speed[keep], w.ped_goal[keep]
    pos = pos[keep]
    next_id = w.next_id
    n_new = int(arrived.sum())
    if n_new:
        spawns = [spawn_pedestrian(env, rng) for _ in range(n_new)]
        ids = np.concatenate([ids, np.arange(next_id, next_id + n_new, dtype=np.int64)])
        pos = np.vstack([pos, np.array([s[0] for s in spawns])])
        goal = np.vstack([goal, np.array([s[1] for s in spawns])])
        speed = np.concatenate([speed, np.full(n_new, kin.ped_speed)])
        next_id += n_new
    return replace(
        w, vehicle=vehicle, ped_ids=ids, ped_pos=pos.reshape(-1, 2), ped_speed=speed, ped_goal=goal.reshape(-1, 2),
        elapsed=(w.step + 1) * params.dt, step=w.step + 1, next_id=next_id,
    )


def safety_check(w: WorldState, radius: float = 1.0) -> bool:
    """Unsafe iff the vehicle is moving and some pedestrian is closer than radius."""
    v = w.vehicle
    if v.v <= 0.0 or w.population == 0:
        return False
    d = min_pedestrian_distance(np.array([v.x]), np.array([v.y]), w.ped_pos[None])
    return bool(d[0] < radius)


def planning_state(w: WorldState, n_ped: int) -> Tuple[POMDPState, List[int]]:
    """POMDP state with the n_ped pedestrians nearest the vehicle, plus their population indices."""
    tracked = nearest_indices(w.vehicle.position, w.ped_pos, n_ped)
    peds = tuple(
        PedestrianState(
            float(w.ped_pos[i, 0]), float(w.ped_pos[i, 1]), float(w.ped_speed[i]),
            (float(w.ped_goal[i, 0]), float(w.ped_goal[i, 1])),
        )
        for i in tracked
    )
    return POMDPState(w.vehicle, peds), tracked


def _step_record(w: WorldState, action: NavAction, tracked: List[int], beliefs: np.ndarray, stats: Dict[str, Any]) -> Dict[str, Any]:
    v = w.vehicle
    return {
        'step': w.step,
        'time': round(w.elapsed, 3),
        'vehicle': {'x': round(v.x, 4), 'y': round(v.y, 4), 'theta': round(v.theta, 4), 'v': round(v.v, 4)},
        'action': action.to_dict(),
        'pedestrian_ids': [int(w.ped_ids[i]) for i in tracked],
        'pedestrians': [[round(float(w.ped_pos[i, 0]), 4), round(float(w.ped_pos[i, 1]), 4)] for i in tracked],
        'beliefs': np.round(beliefs, 4).tolist(),
        'search': stats,
    }


def run_episode(
    env: Environment,
    planner: PlannerKind | NavigationPlanner,
    population: int,
    seed: int,
    settings: Optional[PlannerSettings] = None,
    *,
    trial: int = 0,
    step_limit: int = 600,
    model: Optional[PedestrianModel] = None,
) -> EpisodeResult:
    """Observe, update beliefs, plan, act and step the world until goal, timeout or planner failure.

    Driving into a static obstacle ends the episode as a planner failure.

    The world's randomness depends only on the seed, so planners run with the same seed
    face identical pedestrians.
    """
    settings = settings or PlannerSettings()
    params = settings.reward
    kin = settings.kinematics
    kind = planner if isinstance(planner, PlannerKind) else planner.kind
    rng = np.random.default_rng(derive_seed(seed, 'world'))
    world = initial_world(env, population, rng, kin, seed)
    tracker = BeliefTracker(env.goal_array, settings.belief)
    tracker.reset(world.ped_ids, world.ped_pos)

    trajectory: List[Dict[str, Any]] = []
    sb_count = 0
    unsafe = False
    failure: Optional[str] = None
    outcome = Outcome.PLANNER_FAILURE
    logger.info(f"Episode start: {env.name} {kind.value} population={population} seed={seed}")

    try:
        nav = create_planner(planner, env, settings, seed) if isinstance(planner, PlannerKind) else planner
        nav.reset()
    except Exception as e:
        failure = f"{type(e).__name__}: {e}"
        nav = None

    while failure is None:
        if world.vehicle.distance_to_goal() <= params.d_g:
            outcome = Outcome.GOAL
            break
        if world.step >= step_limit:
            outcome = Outcome.TIMEOUT
            break
        state, tracked = planning_state(world, settings.solver.n_ped)
        belief = tracker.belief.rows(tracked)
        try:
            assert nav is not None
            result = nav.plan(PlannerInput(state, belief, derive_seed(seed, 'plan', world.step)))
        except Exception as e:
            failure = f"{type(e).__name__}: {e}"
            break
        if result.action.is_brake:
            sb_count += 1
        trajectory.append(_step_record(world, result.action, tracked, belief.weights, result.stats))
        world = step_world(world, result.action, rng, env, params, kin, model)
        unsafe = unsafe or safety_check(world, kin.safety_radius)
        if env.obstacle_clearance(world.vehicle.position) <= 0.0:
            x, y = world.vehicle.position
            failure = f"ObstacleCollision: vehicle entered a static obstacle at ({x:.2f}, {y:.2f})"
            break
        tracker.observe(world.ped_ids, world.ped_pos, world.ped_speed, params.dt)

    if failure is not None:
        outcome = Outcome.PLANNER_FAILURE
        logger.warning(f"Planner failure at step {world.step}: {failure}")
    logger.info(
        f"Episode end: {kind.value} seed={seed} outcome={outcome.value} "
        f"time={world.elapsed:.1f}s sb={sb_count} unsafe={unsafe}"
    )
    return EpisodeResult(
        scenario=env.name,
        vehicle=kin.kind,
        planner=kind,
        population=population,
        trial=trial,
        seed=seed,
        travel_time_s=world.elapsed,
        sb_count=sb_count,
        unsafe=unsafe,
        outcome=outcome,
        steps=world.step,
        failure_message=failure,
        trajectory=trajectory,
    )
