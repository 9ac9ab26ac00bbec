"""Probabilistic roadmap with shortest paths to the vehicle goal."""

import logging
from dataclasses import dataclass, replace
from typing import Iterable, List, Optional, Tuple

import networkx as nx
import numpy as np
import pandas as pd
from scipy.spatial import cKDTree

from ..exceptions import DeadStateError, RoadmapError
from ..models.world import Environment
from ..utils.geometry import segments_clear

logger = logging.getLogger(__name__)

START_NODE = 0
GOAL_NODE = 1

# Candidates checked for visibility per query before falling back to all nodes.
_VISIBILITY_PROBE = 8


@dataclass(frozen=True)
class Roadmap:
    """Roadmap graph; node 0 is the vehicle start and node 1 the vehicle goal.

    cost_to_goal is +inf and next_hop is -1 for nodes with no path to the goal
    (next_hop is also -1 at the goal itself).
    """

    nodes: np.ndarray
    graph: nx.Graph
    cost_to_goal: np.ndarray
    next_hop: np.ndarray
    seed: Optional[int] = None

    @classmethod
    def from_edges(cls, nodes: np.ndarray, edges: Iterable[Tuple[int, int]]) -> 'Roadmap':
        """Build a roadmap from explicit edges weighted by Euclidean length."""
        nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
        graph = nx.Graph()
        graph.add_nodes_from(range(len(nodes)))
        for u, v in edges:
            graph.add_edge(int(u), int(v), weight=float(np.linalg.norm(nodes[u] - nodes[v])))
        return shortest_paths_to_goal(cls(nodes, graph, np.full(len(nodes), np.inf), np.full(len(nodes), -1)))

    @property
    def size(self) -> int:
        return int(self.nodes.shape[0])

    def edge_list(self) -> List[Tuple[int, int, float]]:
        """Edges as (u, v, weight) with u < v, sorted."""
        return sorted((min(u, v), max(u, v), float(d['weight'])) for u, v, d in self.graph.edges(data=True))

    def reachable(self) -> np.ndarray:
        return np.isfinite(self.cost_to_goal)


def sample_free_points(env: Environment, n: int, margin: float, rng: np.random.Generator) -> np.ndarray:
    """Rejection-sample n uniform points with obstacle clearance >= margin."""
    points = np.zeros((0, 2))
    for _ in range(1000):
        if len(points) >= n:
            break
        batch = rng.uniform((0.0, 0.0), (env.width, env.height), size=(max(2 * (n - len(points)), 16), 2))
        points = np.vstack([points, batch[env.clearance_array(batch) >= margin]])
    if len(points) < n:
        raise RoadmapError(f"could not sample {n} free points in {env.name}")
    return points[:n]


def connect_neighbours(env: Environment, nodes: np.ndarray, k: int, margin: float) -> nx.Graph:
    """Link each node to its k nearest neighbours when the straight segment is clear."""
    graph = nx.Graph()
    graph.add_nodes_from(range(len(nodes)))
    kk = min(k + 1, len(nodes))
    _, idx = cKDTree(nodes).query(nodes, k=kk)
    pairs = sorted({(min(i, int(j)), max(i, int(j))) for i in range(len(nodes)) for j in idx[i] if int(j) != i})
    if not pairs:
        return graph
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    length = np.linalg.norm(nodes[a] - nodes[b], axis=1)
    ok = segments_clear(env, nodes[a], nodes[b], margin) & (length > 0)
    graph.add_weighted_edges_from((int(u), int(v), float(w)) for u, v, w in zip(a[ok], b[ok], length[ok]))
    return graph


def shortest_paths_to_goal(r: Roadmap) -> Roadmap:
    """Fill cost_to_goal and next_hop from a single-source Dijkstra rooted at the goal.

    next_hop(u) is the lowest-index neighbour on some shortest path.
    """
    if GOAL_NODE >= r.size:
        raise RoadmapError("roadmap has no goal node")
    lengths = nx.single_source_dijkstra_path_length(r.graph, GOAL_NODE, weight='weight')
    cost = np.full(r.size, np.inf)
    for node, d in lengths.items():
        cost[node] = d
    next_hop = np.full(r.size, -1, dtype=np.int64)
    for u in range(r.size):
        if u == GOAL_NODE or not np.isfinite(cost[u]):
            continue
        for v in sorted(r.graph.neighbors(u)):
            w = r.graph[u][v]['weight']
            if abs(cost[v] + w - cost[u]) <= 1e-9 * max(1.0, cost[u]):
                next_hop[u] = v
                break
    return replace(r, cost_to_goal=cost, next_hop=next_hop)


def build_roadmap(
    env: Environment, n_prm: int, k: int, seed: int, margin: float = 1.0, retries: int = 5
) -> Roadmap:
    """Sample a roadmap over free space, resampling until start and goal connect."""
    if n_prm < 2 or k < 1:
        raise ValueError("a roadmap needs n_prm >= 2 and k >= 1")
    rng = np.random.default_rng(seed)
    endpoints = np.array([env.vehicle_start, env.vehicle_goal], dtype=float)
    for attempt in range(1, retries + 1):
        nodes = np.vstack([endpoints, sample_free_points(env, n_prm - 2, margin, rng)])
        graph = connect_neighbours(env, nodes, k, margin)
        if nx.has_path(graph, START_NODE, GOAL_NODE):
            roadmap = shortest_paths_to_goal(
                Roadmap(nodes, graph, np.full(len(nodes), np.inf), np.full(len(nodes), -1), seed)
            )
            logger.info(
                f"Built roadmap for {env.name}: {len(nodes)} nodes, {graph.number_of_edges()} edges "
                f"(attempt {attempt})"
            )
            return roadmap
        logger.warning(f"Roadmap attempt {attempt}/{retries} left the goal unreachable; resampling")
    raise RoadmapError(f"goal unreachable from start after {retries} roadmap attempts")


@dataclass(frozen=True)
class RoadmapQuery:
    """Batched query answer: heading, target node and remaining path length per point."""

    heading: np.ndarray
    target: np.ndarray
    length: np.ndarray
    valid: np.ndarray


def query_batch(r: Roadmap, env: Environment, points: np.ndarray, margin: float = 1.0) -> RoadmapQuery:
    """Route points to the visible reachable node minimizing distance + cost_to_goal.

    A point sitting on a node follows that node's next_hop instead. Points with no
    visible reachable node are marked invalid.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    n = len(points)
    d = np.linalg.norm(points[:, None, :] - r.nodes[None, :, :], axis=-1)
    reachable = r.reachable()
    score = np.where(reachable[None, :] & (d > 1e-9), d + r.cost_to_goal[None, :], np.inf)

    target = np.full(n, -1, dtype=np.int64)
    length = np.full(n, np.inf)
    order = np.argsort(score, axis=1, kind='stable')
    probe = order[:, :min(_VISIBILITY_PROBE, r.size)]
    rows = np.arange(n)[:, None]
    vis = np.isfinite(score[rows, probe]) & segments_clear(env, points[:, None, :], r.nodes[probe], margin)
    hit = vis.any(axis=1)
    first = np.argmax(vis, axis=1)
    target[hit] = probe[hit, first[hit]]
    length[hit] = score[hit, target[hit]]

    rest = np.flatnonzero(~hit)
    if len(rest) and r.size > _VISIBILITY_PROBE:
        full = np.isfinite(score[rest]) & segments_clear(env, points[rest, None, :], r.nodes[None, :, :], margin)
        masked = np.where(full, score[rest], np.inf)
        best = np.argmin(masked, axis=1)
        found = np.isfinite(masked[np.arange(len(rest)), best])
        target[rest[found]] = best[found]
        length[rest[found]] = masked[np.arange(len(rest)), best][found]

    on_node = d <= 1e-9
    node_idx = np.argmax(on_node, axis=1)
    sitting = on_node.any(axis=1) & reachable[node_idx]
    hop = r.next_hop[node_idx]
    at_goal = sitting & (node_idx == GOAL_NODE)
    follow = sitting & (hop >= 0)
    target = np.where(follow, hop, target)
    length = np.where(sitting, r.cost_to_goal[node_idx], length)
    target = np.where(at_goal, GOAL_NODE, target)

    valid = target >= 0
    goal_pts = r.nodes[np.maximum(target, 0)]
    heading = np.where(
        valid & ~at_goal,
        np.arctan2(goal_pts[:, 1] - points[:, 1], goal_pts[:, 0] - points[:, 0]),
        0.0,
    )
    return RoadmapQuery(heading=heading, target=target, length=length, valid=valid)


def prm_next_heading(r: Roadmap, env: Environment, p: Tuple[float, float], margin: float = 1.0) -> float:
    """Heading from p along the roadmap; raises DeadStateError when no node is visible."""
    q = query_batch(r, env, np.array([p], dtype=float), margin)
    if not q.valid[0]:
        raise DeadStateError(f"no visible roadmap node from {p}")
    return float(q.heading[0])


def roadmap_frames(r: Roadmap) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """(nodes, edges) tables for inspection."""
    nodes = pd.DataFrame({
        'node': np.arange(r.size),
        'x': r.nodes[:, 0],
        'y': r.nodes[:, 1],
        'cost_to_goal': r.cost_to_goal,
        'next_hop': r.next_hop,
    })
    edges = pd.DataFrame(r.edge_list(), columns=['u', 'v', 'weight'])
    return nodes, edges
