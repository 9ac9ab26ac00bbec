"""Tests for roadmap construction, shortest paths and roadmap queries."""

import heapq
import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.exceptions import DeadStateError, RoadmapError
from crowdnav.models.world import CircularObstacle, Environment, ScenarioId
from crowdnav.planners.prm_planner import (
    GOAL_NODE,
    START_NODE,
    Roadmap,
    build_roadmap,
    prm_next_heading,
    query_batch,
    roadmap_frames,
)
from crowdnav.services.scenario_service import build_scenario
from crowdnav.utils.geometry import segment_clearance

CORNERS = [(0.0, 0.0), (100.0, 0.0), (100.0, 100.0), (0.0, 100.0)]


def _dijkstra(n, edges, source):
    adjacency = {u: [] for u in range(n)}
    for u, v, w in edges:
        adjacency[u].append((v, w))
        adjacency[v].append((u, w))
    dist = [math.inf] * n
    dist[source] = 0.0
    heap = [(0.0, source)]
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for v, w in adjacency[u]:
            if d + w < dist[v]:
                dist[v] = d + w
                heapq.heappush(heap, (dist[v], v))
    return np.array(dist)


@pytest.fixture(scope="module")
def scattered():
    return build_scenario(ScenarioId.SCATTERED)


class TestBuildRoadmap:
    """Sampling, connection and shortest paths."""

    def test_costs_match_reference_dijkstra(self, scattered):
        """Across 50 seeds, cost_to_goal equals a plain Dijkstra over the edge list."""
        for seed in range(50):
            r = build_roadmap(scattered, 100, 10, seed)
            expected = _dijkstra(r.size, r.edge_list(), GOAL_NODE)
            np.testing.assert_allclose(r.cost_to_goal, expected, rtol=1e-12)
            assert np.isfinite(r.cost_to_goal[START_NODE])

    def test_edges_keep_clearance(self, scattered):
        """Every edge keeps the obstacle margin along its whole length."""
        r = build_roadmap(scattered, 100, 10, 3, margin=1.0)
        edges = r.edge_list()
        assert edges
        a = r.nodes[[u for u, _, _ in edges]]
        b = r.nodes[[v for _, v, _ in edges]]
        assert np.all(segment_clearance(scattered, a, b) >= 1.0)
        assert np.all(scattered.clearance_array(r.nodes) >= 1.0)

    def test_next_hop_is_on_a_shortest_path(self, scattered):
        """Following next_hop adds exactly the edge weight to the cost."""
        r = build_roadmap(scattered, 100, 10, 11)
        for u in np.flatnonzero(r.reachable()):
            if u == GOAL_NODE:
                assert r.next_hop[u] == -1
                continue
            hop = int(r.next_hop[u])
            w = r.graph[u][hop]['weight']
            assert r.cost_to_goal[u] == pytest.approx(r.cost_to_goal[hop] + w)

    def test_endpoints_are_fixed(self, scattered):
        """Node 0 is the vehicle start and node 1 the vehicle goal."""
        r = build_roadmap(scattered, 100, 10, 0)
        assert tuple(r.nodes[START_NODE]) == scattered.vehicle_start
        assert tuple(r.nodes[GOAL_NODE]) == scattered.vehicle_goal
        assert r.cost_to_goal[GOAL_NODE] == 0.0
        assert r.size == 100

    def test_seed_determinism(self, scattered):
        """The same seed rebuilds the same roadmap."""
        a = build_roadmap(scattered, 60, 8, 42)
        b = build_roadmap(scattered, 60, 8, 42)
        np.testing.assert_array_equal(a.nodes, b.nodes)
        assert a.edge_list() == b.edge_list()

    def test_too_few_nodes(self, scattered):
        """A roadmap needs at least start and goal."""
        with pytest.raises(ValueError):
            build_roadmap(scattered, 1, 10, 0)

    def test_blocked_endpoints_exhaust_retries(self, scattered):
        """With only start and goal and an obstacle between them, building fails."""
        with pytest.raises(RoadmapError):
            build_roadmap(scattered, 2, 10, 0, retries=3)


class TestRoadmapQuery:
    """Heading queries against a hand-built roadmap."""

    @pytest.fixture
    def wall_env(self):
        return Environment(
            name="wall",
            obstacles=[CircularObstacle(center=(50.0, 50.0), radius=10.0)],
            pedestrian_goals=CORNERS,
            vehicle_start=(30.0, 50.0),
            vehicle_goal=(70.0, 50.0),
        )

    @pytest.fixture
    def around(self, wall_env):
        nodes = np.array([wall_env.vehicle_start, wall_env.vehicle_goal, (50.0, 70.0), (30.0, 70.0), (70.0, 70.0)])
        return Roadmap.from_edges(nodes, [(0, 3), (3, 2), (2, 4), (4, 1)])

    def test_from_edges_costs(self, around):
        """Costs accumulate along the only path."""
        np.testing.assert_allclose(around.cost_to_goal, [80.0, 0.0, 40.0, 60.0, 20.0])
        assert around.next_hop.tolist() == [3, -1, 4, 2, 1]

    def test_point_on_node_follows_next_hop(self, around, wall_env):
        """Sitting on the start node heads to its next hop, due north."""
        heading = prm_next_heading(around, wall_env, (30.0, 50.0))
        assert heading == pytest.approx(math.pi / 2)

    def test_off_node_picks_best_score(self, around, wall_env):
        """An off-roadmap point with the goal in view heads straight for it."""
        q = query_batch(around, wall_env, np.array([[60.0, 75.0]]))
        assert q.valid[0]
        assert q.target[0] == GOAL_NODE
        assert q.length[0] == pytest.approx(math.sqrt(725.0))

    def test_hidden_nodes_are_skipped(self, around, wall_env):
        """Better-scoring nodes behind the obstacle are passed over for visible ones."""
        q = query_batch(around, wall_env, np.array([[30.0, 40.0]]))
        assert q.target[0] == START_NODE
        assert q.length[0] == pytest.approx(90.0)
        assert q.heading[0] == pytest.approx(math.pi / 2)

    def test_goal_node_is_valid(self, around, wall_env):
        """A point on the goal node is a valid query."""
        q = query_batch(around, wall_env, np.array([wall_env.vehicle_goal]))
        assert q.valid[0]
        assert q.length[0] == 0.0

    def test_hidden_point_is_dead(self, around, wall_env):
        """A point inside the obstacle sees no node."""
        with pytest.raises(DeadStateError):
            prm_next_heading(around, wall_env, (50.0, 50.0))

    def test_frames(self, around):
        """Node and edge tables mirror the roadmap."""
        nodes, edges = roadmap_frames(around)
        assert len(nodes) == 5
        assert len(edges) == 4
        assert list(edges.columns) == ['u', 'v', 'weight']


if __name__ == "__main__":
    pytest.main([__file__])
