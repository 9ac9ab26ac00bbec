"""Tests for the navigation POMDP: actions, kinematics, reward and generative model."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.exceptions import IllegalActionError
from crowdnav.models.params import KinematicsParams, RewardParams, VehicleKind
from crowdnav.models.state import NavAction, PedestrianState, POMDPState, ScenarioParticle, VehicleState
from crowdnav.models.world import CircularObstacle, Environment
from crowdnav.services.pomdp_service import (
    FIXED_HEADINGS,
    ParticleBatch,
    check_action,
    discretize_observation,
    generative_step,
    legal_actions,
    reward,
    sample_ped_noise,
    speed_actions,
    step_pedestrian_arrays,
    step_vehicle,
    transition,
)

GOAL = (90.0, 90.0)


@pytest.fixture
def params():
    return RewardParams()


def _vehicle(x=10.0, y=10.0, theta=0.0, v=0.0, goal=GOAL):
    return VehicleState(x, y, theta, v, goal)


def _state(vehicle, peds=()):
    return POMDPState(vehicle, tuple(PedestrianState(x, y, 1.0, g) for x, y, g in peds))


class TestLegalActions:
    """Extended and speed-only action sets."""

    def test_nine_actions_when_stationary(self):
        """A stopped vehicle has 7 fixed headings + delta_ro with acceleration, plus staying."""
        actions = legal_actions(_vehicle(v=0.0), 0.3, 2.0)
        assert len(actions) == 9
        assert all(a.ds == 1.0 for a in actions[:8])
        assert actions[-1] == NavAction.steer(0.0, 0.0)
        assert not any(a.is_brake for a in actions)

    def test_eleven_actions_when_moving(self):
        """Below v_max: accelerate, decelerate, 8 headings at constant speed, sudden brake."""
        actions = legal_actions(_vehicle(v=1.0), -0.2, 2.0)
        assert len(actions) == 11
        assert NavAction.steer(0.0, 1.0) in actions
        assert NavAction.steer(0.0, -1.0) in actions
        assert NavAction.steer(-0.2, 0.0) in actions
        assert sum(a.is_brake for a in actions) == 1

    def test_no_acceleration_at_max_speed(self):
        """At v_max acceleration is dropped."""
        actions = legal_actions(_vehicle(v=2.0), 0.0, 2.0)
        assert len(actions) == 10
        assert NavAction.steer(0.0, 1.0) not in actions

    def test_fixed_headings(self):
        """The fixed heading changes span -45..45 degrees in 15 degree steps."""
        assert [round(math.degrees(h)) for h in FIXED_HEADINGS] == [-45, -30, -15, 0, 15, 30, 45]

    def test_speed_actions(self):
        """Speed-only actions follow delta_ro and respect the speed range."""
        assert len(speed_actions(_vehicle(v=0.0), 0.1, 2.0)) == 2
        moving = speed_actions(_vehicle(v=1.0), 0.1, 2.0)
        assert len(moving) == 4
        assert all(a.dtheta == pytest.approx(0.1) for a in moving if not a.is_brake)
        assert len(speed_actions(_vehicle(v=2.0), 0.0, 2.0)) == 3

    def test_check_action(self):
        """Actions outside the legal set are rejected."""
        with pytest.raises(IllegalActionError):
            check_action(NavAction.sudden_brake(), _vehicle(v=0.0), 2.0)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.0, 1.0), _vehicle(v=2.0), 2.0)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.3, 1.0), _vehicle(v=1.0), 2.0)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.0, 0.5), _vehicle(v=1.0), 2.0)
        check_action(NavAction.steer(0.3, 1.0), _vehicle(v=1.0), 2.0, speed_only=True)

    def test_check_action_heading_must_be_legal(self):
        """Keeping speed is only legal with a fixed heading change or the roll-out heading."""
        moving = _vehicle(v=1.0)
        check_action(NavAction.steer(math.radians(30), 0.0), moving, 2.0)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(2.0, 0.0), moving, 2.0)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.2, 0.0), moving, 2.0)
        check_action(NavAction.steer(0.2, 0.0), moving, 2.0, delta_ro=0.2)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.2, 1.0), _vehicle(v=0.0), 2.0, delta_ro=0.1)
        with pytest.raises(IllegalActionError):
            check_action(NavAction.steer(0.3, 1.0), moving, 2.0, speed_only=True, delta_ro=0.1)
        with pytest.raises(IllegalActionError):
            generative_step(_state(moving), NavAction.steer(2.0, 0.0), np.random.default_rng(0), RewardParams())

    def test_illegal_action_is_value_error(self):
        """IllegalActionError can be caught as ValueError."""
        with pytest.raises(ValueError):
            generative_step(_state(_vehicle(v=0.0)), NavAction.sudden_brake(), np.random.default_rng(0), RewardParams())


class TestKinematics:
    """Vehicle and pedestrian motion."""

    def test_holonomic_step(self, params):
        """Holonomic: turn first, then move v' * dt along the new heading."""
        kin = KinematicsParams()
        nxt = step_vehicle(_vehicle(v=1.0), NavAction.steer(math.pi / 2, 1.0), params, kin)
        assert nxt.v == 2.0
        assert nxt.x == pytest.approx(10.0)
        assert nxt.y == pytest.approx(11.0)
        assert nxt.theta == pytest.approx(math.pi / 2)

    def test_sudden_brake_stops_in_place(self, params):
        """SB zeroes the speed and the vehicle does not move."""
        nxt = step_vehicle(_vehicle(v=2.0, theta=0.4), NavAction.sudden_brake(), params, KinematicsParams())
        assert (nxt.x, nxt.y, nxt.v) == (10.0, 10.0, 0.0)
        assert nxt.theta == pytest.approx(0.4)

    def test_speed_clamped(self, params):
        """Speed never leaves [0, v_max]."""
        kin = KinematicsParams()
        assert step_vehicle(_vehicle(v=0.0), NavAction.steer(0.0, -1.0), params, kin).v == 0.0
        assert step_vehicle(_vehicle(v=2.0), NavAction.steer(0.0, 1.0), params, kin).v == 2.0

    def test_dubins_arc_is_exact(self):
        """Dubins: a requested turn within the limit is integrated as a circular arc."""
        params = RewardParams(v_max=4.0)
        kin = KinematicsParams(kind=VehicleKind.DUBINS)
        nxt = step_vehicle(_vehicle(x=0.0, y=0.0, v=2.0), NavAction.steer(0.5, 0.0), params, kin)
        dist = 2.0 * 0.5
        kappa = 0.5 / dist
        assert nxt.theta == pytest.approx(0.5)
        assert nxt.x == pytest.approx(math.sin(0.5) / kappa)
        assert nxt.y == pytest.approx((1 - math.cos(0.5)) / kappa)

    def test_dubins_turn_saturates(self):
        """Dubins: curvature is limited by tan(max steer) / wheelbase."""
        params = RewardParams(v_max=4.0)
        kin = KinematicsParams(kind=VehicleKind.DUBINS)
        nxt = step_vehicle(_vehicle(x=0.0, y=0.0, v=1.0), NavAction.steer(math.pi / 2, 0.0), params, kin)
        assert nxt.theta == pytest.approx(kin.max_curvature * 0.5)

    def test_dubins_stationary_cannot_turn(self):
        """Dubins: without motion the heading stays."""
        params = RewardParams(v_max=4.0)
        kin = KinematicsParams(kind=VehicleKind.DUBINS)
        nxt = step_vehicle(_vehicle(v=0.0, theta=0.2), NavAction.steer(0.5, 0.0), params, kin)
        assert nxt.theta == pytest.approx(0.2)

    def test_pedestrian_never_overshoots_goal(self):
        """Pedestrians stop at their goal."""
        pos = np.array([[0.0, 0.0], [10.0, 0.0]])
        goal = np.array([[0.2, 0.0], [0.0, 0.0]])
        nxt = step_pedestrian_arrays(pos, np.array([1.0, 1.0]), goal, np.zeros(2), 0.5)
        np.testing.assert_allclose(nxt, [[0.2, 0.0], [9.5, 0.0]])

    def test_noise_is_truncated(self):
        """Step noise stays within the bound."""
        kin = KinematicsParams()
        noise = sample_ped_noise(np.random.default_rng(1), (5000,), kin)
        assert np.all(np.abs(noise) <= kin.ped_noise_bound)
        assert abs(noise.mean()) < 0.01


class TestReward:
    """Reward terms."""

    def test_pure_time_penalty(self, params):
        """Far from everything at v_max without SB the reward is exactly R_t."""
        s = _state(_vehicle(v=2.0))
        s_next = _state(_vehicle(x=11.0, v=2.0))
        assert reward(s, NavAction.steer(0.0, 0.0), s_next, params) == params.r_t

    def test_speed_shortfall(self, params):
        """Driving below v_max costs (v' - v_max) / v_max."""
        s_next = _state(_vehicle(v=1.0))
        assert reward(s_next, NavAction.steer(0.0, 0.0), s_next, params) == pytest.approx(-1.5)

    def test_goal_reward(self, params):
        """Entering the goal radius adds R_goal."""
        s_next = _state(_vehicle(x=89.5, y=89.5, v=2.0))
        assert reward(s_next, NavAction.steer(0.0, 0.0), s_next, params) == pytest.approx(params.r_t + params.r_goal)

    def test_sudden_brake_penalty(self, params):
        """SB adds R_sb on top of the stopped-speed penalty."""
        s_next = _state(_vehicle(v=0.0))
        r = reward(s_next, NavAction.sudden_brake(), s_next, params)
        assert r == pytest.approx(params.r_t - 1.0 + params.r_sb)

    def test_pedestrian_penalty_only_when_moving(self, params):
        """R_ped applies only to a moving vehicle within d_ped."""
        near = [(10.5, 10.0, (0.0, 0.0))]
        moving = _state(_vehicle(v=2.0), near)
        stopped = _state(_vehicle(v=0.0), near)
        a = NavAction.steer(0.0, 0.0)
        assert reward(moving, a, moving, params) == pytest.approx(params.r_t + params.r_ped)
        assert reward(stopped, a, stopped, params) == pytest.approx(params.r_t - 1.0)

    def test_obstacle_penalty(self, params):
        """R_obs applies within d_obs of an obstacle, unless disabled."""
        env = Environment(obstacles=[CircularObstacle(center=(12.0, 10.0), radius=1.5)], pedestrian_goals=[(0.0, 0.0)])
        s_next = _state(_vehicle(v=2.0))
        a = NavAction.steer(0.0, 0.0)
        assert reward(s_next, a, s_next, params, env) == pytest.approx(params.r_t + params.r_obs)
        no_obs = params.model_copy(update={'obstacle_penalty': False})
        assert reward(s_next, a, s_next, no_obs, env) == pytest.approx(params.r_t)


class TestGenerativeModel:
    """Sampling (s', o, r)."""

    def test_deterministic_per_seed(self, params):
        """Same seed, same outcome."""
        s = _state(_vehicle(v=1.0), [(20.0, 20.0, (0.0, 0.0)), (30.0, 5.0, (100.0, 0.0))])
        a = NavAction.steer(0.0, 1.0)
        first = generative_step(s, a, np.random.default_rng(5), params)
        second = generative_step(s, a, np.random.default_rng(5), params)
        assert first == second

    def test_observation_is_discretized_state(self, params):
        """The observation is the grid cell of every agent."""
        s = _state(_vehicle(v=1.0), [(20.3, 20.7, (0.0, 0.0))])
        s_next, o, _ = generative_step(s, NavAction.steer(0.0, 1.0), np.random.default_rng(0), params)
        assert o == discretize_observation(s_next, 1.0)
        assert o.vehicle_cell == (11, 10)

    def test_half_open_cells(self):
        """Cell boundaries belong to the upper cell."""
        o = discretize_observation(_state(_vehicle(x=2.0, y=0.999)), 1.0)
        assert o.vehicle_cell == (2, 0)
        with pytest.raises(ValueError):
            discretize_observation(_state(_vehicle()), 0.0)

    def test_pedestrians_walk_toward_goals(self, params):
        """Without noise pedestrians move v * dt straight at their goal."""
        kin = KinematicsParams(ped_noise_sigma=0.0)
        s = _state(_vehicle(), [(50.0, 50.0, (100.0, 50.0))])
        s_next, _, _ = generative_step(s, NavAction.steer(0.0, 0.0), np.random.default_rng(0), params, kin)
        assert s_next.pedestrians[0].position == pytest.approx((50.5, 50.0))


class TestParticleBatch:
    """Vectorized stepping matches the scalar model."""

    def test_batch_step_matches_transition(self, params):
        """Each particle of a batch follows the scalar transition with its own noise."""
        kin = KinematicsParams()
        s = _state(_vehicle(v=1.0), [(15.0, 12.0, (0.0, 100.0)), (5.0, 8.0, (100.0, 0.0))])
        particles = [ScenarioParticle(s, seed) for seed in (11, 12, 13)]
        batch = ParticleBatch.from_particles(particles, horizon=4, kin=kin)
        a = NavAction.steer(0.2, 0.0)
        nxt, r, terminal = batch.step(
            np.full(3, a.dtheta), np.full(3, a.ds), np.zeros(3, dtype=bool), params, kin
        )
        for i, p in enumerate(particles):
            expected_noise = sample_ped_noise(np.random.default_rng(p.seed), (4, 2), kin)[0]
            s_next, _, r_i = transition(p.state, a, expected_noise, params, kin)
            got = nxt.state(i)
            assert got.vehicle.x == pytest.approx(s_next.vehicle.x)
            assert got.vehicle.y == pytest.approx(s_next.vehicle.y)
            assert got.vehicle.theta == pytest.approx(s_next.vehicle.theta)
            np.testing.assert_allclose(got.pedestrian_positions(), s_next.pedestrian_positions())
            assert r[i] == pytest.approx(r_i)
        assert not terminal.any()
        assert nxt.depth == 1

    def test_tile_is_blockwise(self):
        """tile repeats the whole batch block after block."""
        s = _state(_vehicle(), [(1.0, 1.0, (0.0, 0.0))])
        batch = ParticleBatch.from_particles([ScenarioParticle(s, 1), ScenarioParticle(s, 2)], 2, KinematicsParams())
        assert batch.tile(3).pid.tolist() == [0, 1, 0, 1, 0, 1]


if __name__ == "__main__":
    pytest.main([__file__])
