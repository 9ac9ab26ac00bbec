"""Tests for heading sources, the reactive controller and roll-out returns."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.models.params import (
    FieldParams,
    KinematicsParams,
    RewardParams,
    RolloutConfig,
    VehicleKind,
)
from crowdnav.models.state import PedestrianState, POMDPState, ScenarioParticle, VehicleState
from crowdnav.models.world import Environment
from crowdnav.planners.fmm_planner import build_travel_time_grid
from crowdnav.planners.hybrid_astar import AStarPath
from crowdnav.planners.rollout_policies import (
    AStarPathSource,
    FmmHeadingSource,
    RolloutPolicy,
    StraightLineSource,
    delta_ro,
    reactive_speed,
    rollout_value,
    simulate_policy,
    steering_change,
)


@pytest.fixture(scope="module")
def corridor():
    return Environment(
        name="corridor",
        width=60.0,
        height=100.0,
        pedestrian_goals=[(0.0, 0.0)],
        vehicle_start=(10.5, 50.5),
        vehicle_goal=(30.5, 50.5),
    )


@pytest.fixture(scope="module")
def corridor_source(corridor):
    return FmmHeadingSource(build_travel_time_grid(corridor, FieldParams(), d_obs=1.0))


class TestReactiveSpeed:
    """Speed rule of the roll-out controller."""

    @pytest.mark.parametrize("v, d_min, expected", [
        (0.0, math.inf, 1.0),
        (1.0, 10.0, 2.0),
        (2.0, 10.0, 2.0),
        (1.0, 4.0, 1.0),
        (2.0, 2.0, 1.0),
        (0.0, 2.0, 0.0),
        (1.0, 3.0, 1.0),
        (1.0, 6.0, 1.0),
    ])
    def test_speed_rule(self, v, d_min, expected):
        """Accelerate beyond d_far, slow down inside d_near, hold in between."""
        assert reactive_speed(v, d_min, RolloutConfig()) == expected

    def test_vectorized(self):
        """Arrays in, arrays out."""
        out = reactive_speed(np.array([0.0, 2.0]), np.array([10.0, 1.0]), RolloutConfig())
        assert out.tolist() == [1.0, 1.0]


class TestSteering:
    """Heading changes toward the source."""

    def test_holonomic_turns_fully(self):
        """A holonomic vehicle turns straight onto the requested heading."""
        dtheta = steering_change(np.array([math.pi / 2]), np.array([0.0]), np.array([1.0]), KinematicsParams(), 0.5)
        assert dtheta[0] == pytest.approx(math.pi / 2)

    def test_dubins_turn_is_saturated(self):
        """The Dubins vehicle turns at most max curvature times distance."""
        kin = KinematicsParams(kind=VehicleKind.DUBINS)
        limit = kin.max_curvature * 2.0 * 0.5
        dtheta = steering_change(np.array([2.0]), np.array([0.0]), np.array([2.0]), kin, 0.5)
        assert dtheta[0] == pytest.approx(min(2.0, limit))

    def test_straight_line_delta(self):
        """delta_ro points the vehicle at the goal."""
        vehicle = VehicleState(0.0, 0.0, 0.0, 1.0, (10.0, 10.0))
        assert delta_ro(StraightLineSource((10.0, 10.0)), vehicle) == pytest.approx(math.pi / 4)

    def test_dead_state_keeps_heading(self, corridor, corridor_source):
        """Outside the field there is no heading and delta_ro is zero."""
        vehicle = VehicleState(-5.0, 50.0, 0.3, 1.0, corridor.vehicle_goal)
        assert delta_ro(corridor_source, vehicle) == 0.0

    def test_astar_source_aims_past_nearest_waypoint(self):
        """A path source steers at the waypoint after the nearest one."""
        path = AStarPath(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 1.0]]), np.zeros(2), np.zeros(2), 0.0)
        src = AStarPathSource(path, (3.0, 1.0))
        heading, valid = src.heading_batch(np.array([1.0]), np.array([0.1]))
        assert valid[0]
        assert heading[0] == pytest.approx(math.atan2(0.9, 1.0))
        length = src.path_length_batch(np.array([0.0]), np.array([0.0]))
        assert length[0] == pytest.approx(1.0 + math.sqrt(2.0) + 1.0)


class TestRolloutValue:
    """Discounted roll-out returns."""

    def test_closed_form_corridor(self, corridor, corridor_source):
        """Accelerate to v_max along the field and arrive after 20 steps."""
        params = RewardParams()
        vehicle = VehicleState(10.5, 50.5, 0.0, 0.0, corridor.vehicle_goal)
        particle = ScenarioParticle(POMDPState(vehicle, ()), seed=0)
        value = rollout_value(particle, corridor_source, RolloutConfig(), params, KinematicsParams(), corridor)
        g = params.gamma
        expected = -1.5 + sum(-(g ** (k - 1)) for k in range(2, 21)) + params.r_goal * g ** 19
        assert value == pytest.approx(expected, rel=1e-3)

    def test_zero_steps_is_zero(self, corridor, corridor_source):
        """M = 0 disables roll-outs."""
        vehicle = VehicleState(10.5, 50.5, 0.0, 0.0, corridor.vehicle_goal)
        particle = ScenarioParticle(POMDPState(vehicle, ()), seed=0)
        cfg = RolloutConfig(m_steps=0)
        assert rollout_value(particle, corridor_source, cfg, RewardParams()) == 0.0

    def test_already_at_goal(self, corridor_source):
        """A scenario inside the goal region is worth r_goal."""
        vehicle = VehicleState(30.0, 50.5, 0.0, 0.0, (30.5, 50.5))
        particle = ScenarioParticle(POMDPState(vehicle, ()), seed=0)
        assert rollout_value(particle, corridor_source, RolloutConfig(), RewardParams()) == 1000.0

    def test_collision_stops_rollout(self):
        """A pedestrian in the way ends the roll-out with r_ped."""
        params = RewardParams()
        kin = KinematicsParams(ped_noise_sigma=0.0)
        vehicle = VehicleState(50.0, 50.0, 0.0, 2.0, (90.0, 50.0))
        ped = PedestrianState(51.0, 50.0, 0.0, (51.0, 0.0))
        particle = ScenarioParticle(POMDPState(vehicle, (ped,)), seed=0)
        value = rollout_value(particle, StraightLineSource((90.0, 50.0)), RolloutConfig(), params, kin)
        assert value == pytest.approx(params.r_t + (1.0 - 2.0) / 2.0 + params.r_ped)


class TestRolloutPolicy:
    """The controller as a policy."""

    def test_policy_matches_rollout(self, corridor, corridor_source):
        """Executing the controller step by step gives the batched roll-out value."""
        params = RewardParams()
        vehicle = VehicleState(10.5, 50.5, 0.0, 0.0, corridor.vehicle_goal)
        state = POMDPState(vehicle, ())
        policy = RolloutPolicy(corridor_source, RolloutConfig(), params)
        simulated = simulate_policy(policy, state, np.random.default_rng(0), 40, params, env=corridor)
        batched = rollout_value(ScenarioParticle(state, 0), corridor_source, RolloutConfig(), params, env=corridor)
        assert simulated == pytest.approx(batched, rel=1e-9)

    def test_first_action(self, corridor_source):
        """From rest with nobody near the controller accelerates straight ahead."""
        vehicle = VehicleState(10.5, 50.5, 0.0, 0.0, (30.5, 50.5))
        action = RolloutPolicy(corridor_source, RolloutConfig(), RewardParams())(POMDPState(vehicle, ()))
        assert action.ds == 1.0
        assert action.dtheta == pytest.approx(0.0, abs=1e-9)


if __name__ == "__main__":
    pytest.main([__file__])
