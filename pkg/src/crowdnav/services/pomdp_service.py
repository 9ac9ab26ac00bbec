"""Navigation POMDP: action sets, kinematics, reward and the generative model.

Every dynamics function is vectorized over a leading batch axis; the scalar
operations (generative_step, reward, ...) wrap the batched ones with a batch of
one, so tree search, roll-outs and the simulator share one implementation.
"""

import math
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import truncnorm

from ..exceptions import IllegalActionError
from ..models.params import KinematicsParams, RewardParams, VehicleKind
from ..models.state import (
    NavAction,
    NavObservation,
    PedestrianState,
    POMDPState,
    ScenarioParticle,
    VehicleState,
)
from ..models.world import Environment
from ..utils.geometry import wrap_angle

FIXED_HEADINGS = tuple(math.radians(d) for d in (-45, -30, -15, 0, 15, 30, 45))
SPEED_STEPS = (-1.0, 0.0, 1.0)


# -- action sets -----------------------------------------------------------------------------

def legal_actions(vehicle: VehicleState, delta_ro: float, v_max: float) -> List[NavAction]:
    """Extended (heading + speed) action set.

    Stationary: accelerate with one of the 7 fixed heading changes or delta_ro, or stay (9).
    Moving: accelerate / decelerate straight, keep speed with any of the 8 heading changes,
    or brake (11). Acceleration is dropped at v_max (10).
    """
    headings = list(FIXED_HEADINGS) + [float(delta_ro)]
    if vehicle.v <= 0.0:
        actions = [NavAction.steer(h, 1.0) for h in headings]
        actions.append(NavAction.steer(0.0, 0.0))
        return actions
    actions = []
    if vehicle.v < v_max:
        actions.append(NavAction.steer(0.0, 1.0))
    actions.append(NavAction.steer(0.0, -1.0))
    actions.extend(NavAction.steer(h, 0.0) for h in headings)
    actions.append(NavAction.sudden_brake())
    return actions


def speed_actions(vehicle: VehicleState, delta_ro: float, v_max: float) -> List[NavAction]:
    """Speed-only action set along a fixed path: {-1, 0, +1} following delta_ro, or brake."""
    actions = []
    for ds in SPEED_STEPS:
        nv = vehicle.v + ds
        if nv < 0.0 or nv > v_max + 1e-9:
            continue
        actions.append(NavAction.steer(delta_ro, ds))
    if vehicle.v > 0.0:
        actions.append(NavAction.sudden_brake())
    return actions


def check_action(
    action: NavAction,
    vehicle: VehicleState,
    v_max: float,
    speed_only: bool = False,
    delta_ro: Optional[float] = None,
) -> None:
    """Raise IllegalActionError unless the action is in the vehicle's legal set.

    The set is built with delta_ro as its roll-out heading. Without delta_ro the full
    set holds only the fixed heading changes, and a speed-only action may follow any
    heading.
    """
    if action.is_brake:
        if vehicle.v <= 0.0:
            raise IllegalActionError("sudden brake while stationary")
        return
    if action.ds not in SPEED_STEPS:
        raise IllegalActionError(f"speed change {action.ds} not in {SPEED_STEPS}")
    if action.ds > 0 and vehicle.v >= v_max:
        raise IllegalActionError("acceleration at maximum speed")
    if action.ds < 0 and vehicle.v <= 0.0:
        raise IllegalActionError("deceleration while stationary")
    if not -math.pi <= action.dtheta <= math.pi:
        raise IllegalActionError(f"heading change {action.dtheta} out of range")
    if speed_only:
        if delta_ro is not None and not _contains(speed_actions(vehicle, delta_ro, v_max), action):
            raise IllegalActionError(f"speed-only action must follow delta_ro {delta_ro:.6f}")
        return
    if vehicle.v <= 0.0 and action.ds == 0.0 and action.dtheta != 0.0:
        raise IllegalActionError("turning in place is not an action")
    if vehicle.v > 0.0 and action.ds != 0.0 and action.dtheta != 0.0:
        raise IllegalActionError("speed changes are only legal with a straight heading")
    if not _contains(legal_actions(vehicle, 0.0 if delta_ro is None else delta_ro, v_max), action):
        raise IllegalActionError(f"heading change {action.dtheta:.6f} is not in the legal set")


def _contains(actions: Sequence[NavAction], action: NavAction) -> bool:
    return any(
        a.kind is action.kind and a.ds == action.ds and abs(a.dtheta - action.dtheta) <= 1e-9
        for a in actions
    )


def action_arrays(actions: Sequence[NavAction], reps: int = 1) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(dtheta, ds, brake) arrays with each action repeated `reps` times."""
    dtheta = np.repeat([a.dtheta for a in actions], reps).astype(float)
    ds = np.repeat([a.ds for a in actions], reps).astype(float)
    brake = np.repeat([a.is_brake for a in actions], reps).astype(bool)
    return dtheta, ds, brake


# -- kinematics ------------------------------------------------------------------------------

def dubins_turn_limit(v: float, kin: KinematicsParams, dt: float) -> float:
    """Largest heading change per step for the Dubins vehicle; a stopped vehicle counts as 1 m/s."""
    return kin.max_curvature * max(v, 1.0) * dt


def step_vehicle_arrays(
    x: np.ndarray,
    y: np.ndarray,
    theta: np.ndarray,
    v: np.ndarray,
    dtheta: np.ndarray,
    ds: np.ndarray,
    brake: np.ndarray,
    params: RewardParams,
    kin: KinematicsParams,
    env: Optional[Environment] = None,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Advance vehicles by one step of params.dt."""
    v_new = np.where(brake, 0.0, np.clip(v + ds, 0.0, params.v_max))
    dist = v_new * params.dt
    if kin.kind is VehicleKind.HOLONOMIC:
        theta_new = np.where(brake, theta, wrap_angle(theta + dtheta))
        x_new = x + dist * np.cos(theta_new)
        y_new = y + dist * np.sin(theta_new)
    else:
        moving = dist > 0.0
        kappa = np.where(moving, dtheta / np.where(moving, dist, 1.0), 0.0)
        kappa = np.clip(kappa, -kin.max_curvature, kin.max_curvature)
        turn = kappa * dist
        straight = np.abs(kappa) < 1e-9
        k = np.where(straight, 1.0, kappa)
        x_new = np.where(straight, x + dist * np.cos(theta), x + (np.sin(theta + turn) - np.sin(theta)) / k)
        y_new = np.where(straight, y + dist * np.sin(theta), y - (np.cos(theta + turn) - np.cos(theta)) / k)
        theta_new = wrap_angle(theta + turn)
    if env is not None:
        x_new, y_new = env.clip_to_field(x_new, y_new)
    return x_new, y_new, theta_new, v_new


def step_pedestrian_arrays(
    pos: np.ndarray, speed: np.ndarray, goal: np.ndarray, noise: np.ndarray, dt: float
) -> np.ndarray:
    """Move pedestrians toward their goals by speed*dt + noise, never past the goal."""
    d = goal - pos
    dist = np.sqrt(np.sum(d * d, axis=-1))
    step = np.clip(speed * dt + noise, 0.0, dist)
    unit = d / np.where(dist > 0.0, dist, 1.0)[..., None]
    return pos + unit * step[..., None]


def sample_ped_noise(rng: np.random.Generator, shape: Tuple[int, ...], kin: KinematicsParams) -> np.ndarray:
    """Zero-mean truncated Gaussian step noise."""
    if kin.ped_noise_sigma <= 0.0 or kin.ped_noise_bound <= 0.0 or 0 in shape:
        return np.zeros(shape)
    b = kin.ped_noise_bound / kin.ped_noise_sigma
    return truncnorm.rvs(-b, b, loc=0.0, scale=kin.ped_noise_sigma, size=shape, random_state=rng)


def particle_noise(seed: int, horizon: int, n_ped: int, kin: KinematicsParams) -> np.ndarray:
    """Pre-drawn (horizon, n_ped) noise stream of one scenario particle."""
    return sample_ped_noise(np.random.default_rng(seed), (horizon, n_ped), kin)


# -- reward ----------------------------------------------------------------------------------

def min_pedestrian_distance(vx: np.ndarray, vy: np.ndarray, ped: np.ndarray) -> np.ndarray:
    """Distance from each vehicle (B,) to its nearest pedestrian in ped (B, n, 2); inf when n = 0."""
    if ped.shape[-2] == 0:
        return np.full(np.shape(vx), np.inf)
    d = np.hypot(ped[..., 0] - vx[..., None], ped[..., 1] - vy[..., None])
    return np.min(d, axis=-1)


def reward_arrays(
    x_new: np.ndarray,
    y_new: np.ndarray,
    v_new: np.ndarray,
    goal: Tuple[float, float],
    ped_new: np.ndarray,
    brake: np.ndarray,
    params: RewardParams,
    env: Optional[Environment] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """Per-transition reward and terminal flag (goal reached, pedestrian hit, inside an obstacle)."""
    at_goal = np.hypot(goal[0] - x_new, goal[1] - y_new) <= params.d_g
    r = params.r_t + (v_new - params.v_max) / params.v_max
    r = r + np.where(at_goal, params.r_goal, 0.0)
    if env is not None and env.obstacles:
        clearance = env.clearance_array(np.stack([x_new, y_new], axis=-1))
    else:
        clearance = np.full(np.shape(x_new), np.inf)
    if params.obstacle_penalty:
        r = r + np.where(clearance < params.d_obs, params.r_obs, 0.0)
    ped_hit = (v_new > 0.0) & (min_pedestrian_distance(x_new, y_new, ped_new) < params.d_ped)
    r = r + np.where(ped_hit, params.r_ped, 0.0)
    r = r + np.where(brake, params.r_sb, 0.0)
    terminal = at_goal | ped_hit | (clearance < 0.0)
    return r, terminal


def reward(
    s: POMDPState,
    a: NavAction,
    s_next: POMDPState,
    params: RewardParams,
    env: Optional[Environment] = None,
) -> float:
    """Sum of the applicable reward terms for the transition s -a-> s_next."""
    veh = s_next.vehicle
    r, _ = reward_arrays(
        np.array([veh.x]), np.array([veh.y]), np.array([veh.v]), veh.goal,
        s_next.pedestrian_positions()[None], np.array([a.is_brake]), params, env,
    )
    return float(r[0])


# -- observations ----------------------------------------------------------------------------

def observation_keys(vx: np.ndarray, vy: np.ndarray, ped: np.ndarray, cell: float) -> np.ndarray:
    """Integer observation rows (B, 2 + 2n): vehicle cell then pedestrian cells."""
    veh = np.floor(np.stack([vx, vy], axis=-1) / cell)
    peds = np.floor(ped / cell).reshape(ped.shape[0], 2 * ped.shape[1])
    return np.concatenate([veh, peds], axis=1).astype(np.int64)


def discretize_observation(s: POMDPState, cell: float) -> NavObservation:
    """Map every position to its half-open grid cell."""
    if cell <= 0:
        raise ValueError("cell must be positive")
    v = s.vehicle
    vcell = (math.floor(v.x / cell), math.floor(v.y / cell))
    pcells = tuple((math.floor(p.x / cell), math.floor(p.y / cell)) for p in s.pedestrians)
    return NavObservation(vehicle_cell=vcell, pedestrian_cells=pcells)


# -- scalar generative model ----------------------------------------------------------------

def step_vehicle(
    vehicle: VehicleState,
    action: NavAction,
    params: RewardParams,
    kin: KinematicsParams,
    env: Optional[Environment] = None,
) -> VehicleState:
    x, y, th, v = step_vehicle_arrays(
        np.array([vehicle.x]), np.array([vehicle.y]), np.array([vehicle.theta]), np.array([vehicle.v]),
        np.array([action.dtheta]), np.array([action.ds]), np.array([action.is_brake]), params, kin, env,
    )
    return replace(vehicle, x=float(x[0]), y=float(y[0]), theta=float(th[0]), v=float(v[0]))


def generative_step(
    s: POMDPState,
    a: NavAction,
    rng: np.random.Generator,
    params: RewardParams,
    kin: Optional[KinematicsParams] = None,
    env: Optional[Environment] = None,
    speed_only: bool = False,
    delta_ro: Optional[float] = None,
) -> Tuple[POMDPState, NavObservation, float]:
    """Sample (s', o, r) from the generative model; a is checked against the legal set for delta_ro."""
    kin = kin or KinematicsParams()
    check_action(a, s.vehicle, params.v_max, speed_only, delta_ro)
    noise = sample_ped_noise(rng, (len(s.pedestrians),), kin)
    return transition(s, a, noise, params, kin, env)


def transition(
    s: POMDPState,
    a: NavAction,
    noise: np.ndarray,
    params: RewardParams,
    kin: KinematicsParams,
    env: Optional[Environment] = None,
) -> Tuple[POMDPState, NavObservation, float]:
    """Deterministic transition given the pedestrian noise draw."""
    vehicle = step_vehicle(s.vehicle, a, params, kin, env)
    pos = step_pedestrian_arrays(
        s.pedestrian_positions(), s.pedestrian_speeds(), s.pedestrian_goals(), noise, params.dt
    )
    pedestrians = tuple(
        replace(p, x=float(pos[i, 0]), y=float(pos[i, 1])) for i, p in enumerate(s.pedestrians)
    )
    s_next = POMDPState(vehicle=vehicle, pedestrians=pedestrians)
    return s_next, discretize_observation(s_next, kin.obs_cell), reward(s, a, s_next, params, env)


# -- particle batches -----------------------------------------------------------------------

@dataclass
class ParticleBatch:
    """Scenario particles stored column-wise for vectorized stepping.

    Vehicle columns are per particle: inside the tree they coincide, during
    roll-outs the reactive controller lets speeds diverge.
    """

    pid: np.ndarray
    depth: int
    x: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    v: np.ndarray
    ped_pos: np.ndarray
    ped_speed: np.ndarray
    ped_goal: np.ndarray
    noise: np.ndarray
    vehicle_goal: Tuple[float, float]

    @classmethod
    def from_particles(
        cls, particles: Sequence[ScenarioParticle], horizon: int, kin: KinematicsParams, depth: int = 0
    ) -> 'ParticleBatch':
        """Stack particles and pre-draw each particle's noise stream from its seed."""
        if not particles:
            raise ValueError("at least one particle is required")
        n = len(particles[0].state.pedestrians)
        states = [p.state for p in particles]
        return cls(
            pid=np.arange(len(particles)),
            depth=depth,
            x=np.array([s.vehicle.x for s in states], dtype=float),
            y=np.array([s.vehicle.y for s in states], dtype=float),
            theta=np.array([s.vehicle.theta for s in states], dtype=float),
            v=np.array([s.vehicle.v for s in states], dtype=float),
            ped_pos=np.array([s.pedestrian_positions() for s in states], dtype=float).reshape(len(states), n, 2),
            ped_speed=np.array([s.pedestrian_speeds() for s in states], dtype=float).reshape(len(states), n),
            ped_goal=np.array([s.pedestrian_goals() for s in states], dtype=float).reshape(len(states), n, 2),
            noise=np.stack([particle_noise(p.seed, horizon, n, kin) for p in particles]),
            vehicle_goal=states[0].vehicle.goal,
        )

    @property
    def size(self) -> int:
        return int(self.pid.shape[0])

    @property
    def n_ped(self) -> int:
        return int(self.ped_pos.shape[1])

    def take(self, idx: np.ndarray) -> 'ParticleBatch':
        return replace(
            self, pid=self.pid[idx], x=self.x[idx], y=self.y[idx], theta=self.theta[idx], v=self.v[idx],
            ped_pos=self.ped_pos[idx], ped_speed=self.ped_speed[idx], ped_goal=self.ped_goal[idx],
        )

    def tile(self, reps: int) -> 'ParticleBatch':
        """Repeat the whole batch reps times (block order)."""
        return self.take(np.tile(np.arange(self.size), reps))

    def noise_at(self, depth: int) -> np.ndarray:
        if depth >= self.noise.shape[1]:
            return np.zeros((self.size, self.n_ped))
        return self.noise[self.pid, depth]

    def vehicle_state(self, i: int = 0) -> VehicleState:
        return VehicleState(float(self.x[i]), float(self.y[i]), float(self.theta[i]), float(self.v[i]), self.vehicle_goal)

    def state(self, i: int) -> POMDPState:
        peds = tuple(
            PedestrianState(
                float(self.ped_pos[i, j, 0]), float(self.ped_pos[i, j, 1]), float(self.ped_speed[i, j]),
                (float(self.ped_goal[i, j, 0]), float(self.ped_goal[i, j, 1])),
            )
            for j in range(self.n_ped)
        )
        return POMDPState(vehicle=self.vehicle_state(i), pedestrians=peds)

    def goal_distance(self) -> np.ndarray:
        return np.hypot(self.vehicle_goal[0] - self.x, self.vehicle_goal[1] - self.y)

    def nearest_pedestrian_distance(self) -> np.ndarray:
        return min_pedestrian_distance(self.x, self.y, self.ped_pos)

    def step(
        self,
        dtheta: np.ndarray,
        ds: np.ndarray,
        brake: np.ndarray,
        params: RewardParams,
        kin: KinematicsParams,
        env: Optional[Environment] = None,
    ) -> Tuple['ParticleBatch', np.ndarray, np.ndarray]:
        """Apply per-particle actions; returns (next batch, rewards, terminal flags)."""
        x, y, th, v = step_vehicle_arrays(
            self.x, self.y, self.theta, self.v, dtheta, ds, brake, params, kin, env
        )
        ped = step_pedestrian_arrays(
            self.ped_pos, self.ped_speed, self.ped_goal, self.noise_at(self.depth), params.dt
        )
        r, terminal = reward_arrays(x, y, v, self.vehicle_goal, ped, brake, params, env)
        nxt = replace(self, depth=self.depth + 1, x=x, y=y, theta=th, v=v, ped_pos=ped)
        return nxt, r, terminal

    def observation_keys(self, cell: float) -> np.ndarray:
        return observation_keys(self.x, self.y, self.ped_pos, cell)
