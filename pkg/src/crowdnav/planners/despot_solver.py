"""Anytime belief-tree search over sampled scenarios.

Node bounds are means over the node's scenarios, discounted to the root. With
n_b scenarios at a node and n_c reaching child c under action a:

    Q(b, a) = gamma**depth * mean_r(b, a) - lambda * K / n_b + sum_c (n_c / n_b) * V(c)
    L(b)    = max_a Q_L(b, a)   (L0(b), the mean roll-out return, until b is expanded)
    U(b)    = max_a Q_U(b, a)

Scenarios that hit a terminal state leave the tree after collecting their reward.

Step rewards short of the goal are negative, so a truncated roll-out can overstate
what a scenario is worth. An expanded node therefore takes its backed-up value and drops L0, and the
root lower bound may fall when a search uncovers an unavoidable collision.
"""

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Optional

import numpy as np

from ..exceptions import SolverError
from ..models.params import PlannerSettings, RewardParams
from ..models.state import NavAction, POMDPState, VehicleState
from ..models.world import Environment
from ..services.belief_service import IntentionBelief, sample_scenarios
from ..services.pomdp_service import ParticleBatch, action_arrays, legal_actions
from .rollout_policies import HeadingSource, delta_ro, rollout_batch

logger = logging.getLogger(__name__)

ActionFn = Callable[[VehicleState, float, float], List[NavAction]]

_TIE = 1e-9


class ActionNode:
    __slots__ = ('action', 'reward', 'n_parent', 'children')

    def __init__(self, action: NavAction, reward: float, n_parent: int) -> None:
        self.action = action
        self.reward = reward
        self.n_parent = n_parent
        self.children: List['BeliefNode'] = []

    def q_lower(self) -> float:
        return self.reward + sum(c.batch.size / self.n_parent * c.lower for c in self.children)

    def q_upper(self) -> float:
        return self.reward + sum(c.batch.size / self.n_parent * c.upper for c in self.children)


class BeliefNode:
    """Scenarios reaching this node plus their bounds."""

    __slots__ = ('batch', 'depth', 'weight', 'lower', 'upper', 'actions')

    def __init__(self, batch: ParticleBatch, depth: int, weight: float, lower: float, upper: float) -> None:
        self.batch = batch
        self.depth = depth
        self.weight = weight
        self.lower = lower
        self.upper = upper
        self.actions: Optional[List[ActionNode]] = None

    @property
    def expanded(self) -> bool:
        return self.actions is not None

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    def iter_nodes(self) -> Iterator['BeliefNode']:
        yield self
        for a in self.actions or ():
            for c in a.children:
                yield from c.iter_nodes()


@dataclass
class SearchStats:
    iterations: int = 0
    nodes: int = 1
    root_lower: float = 0.0
    root_upper: float = 0.0
    elapsed_s: float = 0.0
    consistency_fixes: int = 0
    lower_history: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, float]:
        return {
            'iterations': self.iterations,
            'nodes': self.nodes,
            'root_lower': round(self.root_lower, 6),
            'root_upper': round(self.root_upper, 6),
            'consistency_fixes': self.consistency_fixes,
        }


@dataclass
class SearchResult:
    action: NavAction
    stats: SearchStats
    root: BeliefNode


def upper_bound_values(batch: ParticleBatch, src: HeadingSource, params: RewardParams) -> np.ndarray:
    """Per-scenario optimistic value from the current state (undiscounted).

    r_ped for a moving vehicle already within d_ped of a pedestrian, otherwise
    gamma**t * r_goal with t the steps needed to cover the source's path length at v_max.

    FMM lengths run around obstacles inflated by d_obs and PRM lengths follow roadmap
    edges, so t can exceed the true minimum and the value can undershoot. Callers raise
    an upper bound that falls below its lower bound and count it in consistency_fixes.
    """
    length = src.path_length_batch(batch.x, batch.y)
    finite = np.isfinite(length)
    steps = np.ceil(np.where(finite, length, 0.0) / (params.v_max * params.dt) - 1e-9)
    value = np.where(finite, params.gamma ** np.maximum(steps, 0.0) * params.r_goal, 0.0)
    value = np.where(batch.goal_distance() <= params.d_g, params.r_goal, value)
    hit = (batch.v > 0.0) & (batch.nearest_pedestrian_distance() < params.d_ped)
    return np.where(hit, params.r_ped, value)


def lower_bound(
    node: BeliefNode, src: HeadingSource, settings: PlannerSettings, env: Optional[Environment] = None
) -> float:
    """Mean roll-out return of the node's scenarios, discounted to the node's depth."""
    values = rollout_batch(node.batch, src, settings.rollout, settings.reward, settings.kinematics, env)
    return settings.reward.gamma ** node.depth * float(np.mean(values))


def upper_bound(node: BeliefNode, src: HeadingSource, params: RewardParams) -> float:
    """Mean analytic upper bound of the node's scenarios, discounted to the node's depth."""
    return params.gamma ** node.depth * float(np.mean(upper_bound_values(node.batch, src, params)))


def _pick(actions: List[ActionNode], score: Callable[[ActionNode], float]) -> ActionNode:
    """Highest score; near ties go to the lexicographically smallest action."""
    best = actions[0]
    best_score = score(best)
    for a in actions[1:]:
        s = score(a)
        if s > best_score + _TIE or (abs(s - best_score) <= _TIE and a.action.sort_key < best.action.sort_key):
            best, best_score = a, s
    return best


class DespotSolver:
    """Bound-guided tree search over K determinized scenarios.

    The wall clock bounds the search unless an iteration cap is configured, in which
    case the result depends only on the inputs and the seed.
    """

    def __init__(
        self,
        src: HeadingSource,
        settings: PlannerSettings,
        env: Optional[Environment] = None,
        action_fn: ActionFn = legal_actions,
        clock: Callable[[], float] = time.perf_counter,
    ) -> None:
        self.src = src
        self.settings = settings
        self.env = env
        self.action_fn = action_fn
        self.clock = clock
        self._stats = SearchStats()

    @property
    def _gamma(self) -> float:
        return self.settings.reward.gamma

    def search(self, belief: IntentionBelief, state: POMDPState, seed: int) -> SearchResult:
        cfg = self.settings.solver
        t0 = self.clock()
        self._stats = stats = SearchStats()
        particles = sample_scenarios(belief, state, cfg.k_scenarios, seed)
        batch = ParticleBatch.from_particles(
            particles, cfg.max_depth + self.settings.rollout.m_steps, self.settings.kinematics
        )
        root = BeliefNode(batch, 0, 1.0, 0.0, 0.0)
        root.lower = lower_bound(root, self.src, self.settings, self.env)
        root.upper = max(upper_bound(root, self.src, self.settings.reward), root.lower)

        deadline = cfg.budget_s * (1.0 - cfg.time_margin)
        while True:
            if cfg.iteration_cap is not None:
                if stats.iterations >= cfg.iteration_cap:
                    break
            elif stats.iterations > 0 and self.clock() - t0 >= deadline:
                break
            if root.expanded and root.gap <= 1e-6:
                break
            progressed = self._trial(root)
            stats.iterations += 1
            stats.lower_history.append(root.lower)
            if not progressed:
                break

        if not root.actions:
            raise SolverError("no legal actions at the root")
        best = _pick(root.actions, ActionNode.q_lower)
        stats.root_lower = root.lower
        stats.root_upper = root.upper
        stats.elapsed_s = self.clock() - t0
        logger.debug(
            f"Search: {stats.iterations} trials, {stats.nodes} nodes, "
            f"bounds [{root.lower:.3f}, {root.upper:.3f}], chose {best.action.to_dict()}"
        )
        return SearchResult(best.action, stats, root)

    def _trial(self, root: BeliefNode) -> bool:
        """One descent from the root; returns whether any node was expanded."""
        xi = self.settings.solver.xi
        node = root
        path = [root]
        expanded = False
        while node.depth < self.settings.solver.max_depth:
            if not node.expanded:
                self._expand(node)
                expanded = True
                self._update(node)
            assert node.actions is not None
            if not node.actions:
                break
            a_star = _pick(node.actions, ActionNode.q_upper)
            if not a_star.children:
                break
            target = root.gap
            child = max(a_star.children, key=lambda c: c.weight * (c.gap - xi * target))
            if child.weight * (child.gap - xi * target) <= 0.0:
                break
            node = child
            path.append(node)
        for n in reversed(path):
            self._update(n)
        return expanded

    def _expand(self, node: BeliefNode) -> None:
        settings = self.settings
        params = settings.reward
        kin = settings.kinematics
        cfg = settings.solver
        vehicle = node.batch.vehicle_state(0)
        actions = self.action_fn(vehicle, delta_ro(self.src, vehicle, kin, params), params.v_max)
        node.actions = []
        if not actions:
            return
        n = node.batch.size
        tiled = node.batch.tile(len(actions))
        dtheta, ds, brake = action_arrays(actions, n)
        nxt, r, terminal = tiled.step(dtheta, ds, brake, params, kin, self.env)

        alive = np.flatnonzero(~terminal)
        lower_vals = np.zeros(tiled.size)
        upper_vals = np.zeros(tiled.size)
        child_depth = node.depth + 1
        if len(alive):
            survivors = nxt.take(alive)
            lower_vals[alive] = rollout_batch(survivors, self.src, settings.rollout, params, kin, self.env)
            if child_depth < cfg.max_depth:
                upper_vals[alive] = upper_bound_values(survivors, self.src, params)
        keys = nxt.observation_keys(kin.obs_cell)
        disc = self._gamma ** node.depth
        child_disc = self._gamma ** child_depth

        for ai, action in enumerate(actions):
            lo, hi = ai * n, (ai + 1) * n
            rho = disc * float(np.mean(r[lo:hi])) - cfg.regularization * cfg.k_scenarios / n
            anode = ActionNode(action, rho, n)
            node.actions.append(anode)
            members = alive[(alive >= lo) & (alive < hi)]
            if not len(members):
                continue
            _, inverse = np.unique(keys[members], axis=0, return_inverse=True)
            inverse = inverse.reshape(-1)
            for g in range(int(inverse.max()) + 1):
                idx = members[inverse == g]
                lower = child_disc * float(np.mean(lower_vals[idx]))
                upper = child_disc * float(np.mean(upper_vals[idx])) if child_depth < cfg.max_depth else lower
                if upper < lower:
                    self._stats.consistency_fixes += 1
                    logger.debug(
                        f"Raised leaf upper bound {upper:.6f} to lower {lower:.6f} at depth {child_depth}"
                    )
                    upper = lower
                anode.children.append(BeliefNode(nxt.take(idx), child_depth, len(idx) / cfg.k_scenarios, lower, upper))
                self._stats.nodes += 1

    def _update(self, node: BeliefNode) -> None:
        if not node.actions:
            if node.actions is not None:
                node.upper = node.lower
            return
        node.lower = max(a.q_lower() for a in node.actions)
        upper = max(a.q_upper() for a in node.actions)
        if upper < node.lower - 1e-12:
            self._stats.consistency_fixes += 1
            logger.debug(f"Raised upper bound {upper:.6f} to lower {node.lower:.6f} at depth {node.depth}")
            upper = node.lower
        node.upper = max(upper, node.lower)


def plan(
    belief: IntentionBelief,
    state: POMDPState,
    src: HeadingSource,
    settings: PlannerSettings,
    seed: int,
    env: Optional[Environment] = None,
    action_fn: ActionFn = legal_actions,
) -> NavAction:
    """Search from the observed state and return the root action with the best lower bound."""
    if settings.solver.budget_s <= 0:
        raise SolverError("planning budget must be positive")
    return DespotSolver(src, settings, env, action_fn).search(belief, state, seed).action

