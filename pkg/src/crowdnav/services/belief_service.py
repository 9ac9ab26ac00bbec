"""Pedestrian intention beliefs and scenario sampling."""

import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence

import numpy as np

from ..models.params import BeliefParams
from ..models.state import PedestrianState, POMDPState, ScenarioParticle

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class IntentionBelief:
    """Per-pedestrian discrete distribution over the candidate goals.

    weights has shape (n_ped, n_goals); each row sums to 1.
    """

    weights: np.ndarray
    goals: np.ndarray

    @classmethod
    def uniform(cls, n_ped: int, goals: np.ndarray) -> 'IntentionBelief':
        goals = np.asarray(goals, dtype=float).reshape(-1, 2)
        return cls(np.full((n_ped, len(goals)), 1.0 / len(goals)), goals)

    @property
    def n_ped(self) -> int:
        return int(self.weights.shape[0])

    @property
    def n_goals(self) -> int:
        return int(self.goals.shape[0])

    def rows(self, indices: Sequence[int]) -> 'IntentionBelief':
        return IntentionBelief(self.weights[list(indices)].reshape(-1, self.n_goals), self.goals)

    def entropy(self) -> np.ndarray:
        """Normalized entropy per row, in [0, 1]."""
        if self.n_goals <= 1:
            return np.zeros(self.n_ped)
        p = self.weights
        h = -np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=1)
        return h / np.log(self.n_goals)

    def most_likely(self) -> np.ndarray:
        return np.argmax(self.weights, axis=1)


def progress_log_likelihood(
    goals: np.ndarray, prev: np.ndarray, nxt: np.ndarray, kappa: float
) -> np.ndarray:
    """kappa * cos(angle between observed displacement and direction to each goal), shape (n, G).

    Zero displacement carries no information (all zeros); a pedestrian standing on a
    goal counts as perfectly aligned with it.
    """
    disp = nxt - prev
    dnorm = np.linalg.norm(disp, axis=1)
    to_goal = goals[None, :, :] - prev[:, None, :]
    gnorm = np.linalg.norm(to_goal, axis=2)
    dots = np.sum(disp[:, None, :] * to_goal, axis=2)
    cos = np.where(gnorm > 0, dots / (np.where(gnorm > 0, gnorm, 1.0) * np.where(dnorm > 0, dnorm, 1.0)[:, None]), 1.0)
    cos = np.where((dnorm > 1e-9)[:, None], cos, 0.0)
    return kappa * cos


def update_belief(
    b: IntentionBelief,
    prev: np.ndarray,
    nxt: np.ndarray,
    v: Optional[np.ndarray] = None,
    dt: Optional[float] = None,
    params: Optional[BeliefParams] = None,
) -> IntentionBelief:
    """Bayes update b'(g) = eta * p(x', y' | x, y, v, g) * b(g), then floor and renormalize.

    The likelihood only depends on the direction of travel, so v and dt are accepted
    for interface compatibility with speed-aware pedestrian models.
    """
    params = params or BeliefParams()
    prev = np.asarray(prev, dtype=float).reshape(-1, 2)
    nxt = np.asarray(nxt, dtype=float).reshape(-1, 2)
    if len(prev) != b.n_ped or len(nxt) != b.n_ped:
        raise ValueError(f"expected {b.n_ped} aligned positions, got {len(prev)} and {len(nxt)}")
    if b.n_ped == 0:
        return b
    log_lik = progress_log_likelihood(b.goals, prev, nxt, params.kappa)
    lik = np.exp(log_lik - log_lik.max(axis=1, keepdims=True))
    post = b.weights * lik
    total = post.sum(axis=1, keepdims=True)
    bad = ~np.isfinite(total[:, 0]) | (total[:, 0] <= 0.0)
    if bad.any():
        logger.debug(f"Belief underflow for {int(bad.sum())} pedestrians; resetting to uniform")
    post = np.where(bad[:, None], 1.0, post)
    post = post / post.sum(axis=1, keepdims=True)
    if params.floor > 0:
        post = np.maximum(post, params.floor)
        post = post / post.sum(axis=1, keepdims=True)
    return replace(b, weights=post)


def handle_population_change(b: IntentionBelief, departed: Sequence[int], spawned: int) -> IntentionBelief:
    """Drop rows of departed pedestrians and append uniform rows for newcomers."""
    weights = np.delete(b.weights, list(departed), axis=0)
    if spawned > 0:
        weights = np.vstack([weights, np.full((spawned, b.n_goals), 1.0 / b.n_goals)])
    return replace(b, weights=weights.reshape(-1, b.n_goals))


def sample_goal_indices(weights: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Inverse-CDF draw of one goal index per (particle, pedestrian), shape (k, n)."""
    cdf = np.cumsum(weights, axis=1)
    u = rng.random((k, weights.shape[0]))
    idx = np.sum(u[:, :, None] >= cdf[None, :, :], axis=2)
    return np.minimum(idx, weights.shape[1] - 1)


def sample_scenarios(b: IntentionBelief, state: POMDPState, k: int, seed: int) -> List[ScenarioParticle]:
    """K particles: each tracked pedestrian's goal drawn from its belief row; deterministic per seed."""
    if k <= 0:
        raise ValueError("K must be positive")
    if len(state.pedestrians) != b.n_ped:
        raise ValueError(f"state has {len(state.pedestrians)} pedestrians, belief has {b.n_ped} rows")
    rng = np.random.default_rng(seed)
    goal_idx = sample_goal_indices(b.weights, k, rng)
    seeds = rng.integers(0, 2**62, size=k)
    particles = []
    for i in range(k):
        peds = tuple(
            PedestrianState(p.x, p.y, p.v, (float(b.goals[g, 0]), float(b.goals[g, 1])))
            for p, g in zip(state.pedestrians, goal_idx[i])
        )
        particles.append(ScenarioParticle(POMDPState(state.vehicle, peds), int(seeds[i])))
    return particles


class BeliefTracker:
    """Keeps one belief row per pedestrian aligned with the simulator's population order.

    The simulator removes arrivals in place and appends newcomers, so after every step
    the observed ids are the surviving ids (same order) followed by the new ones.
    """

    def __init__(self, goals: np.ndarray, params: Optional[BeliefParams] = None) -> None:
        self.params = params or BeliefParams()
        self.goals = np.asarray(goals, dtype=float).reshape(-1, 2)
        self.ids = np.zeros(0, dtype=np.int64)
        self.positions = np.zeros((0, 2))
        self.belief = IntentionBelief.uniform(0, self.goals)

    def reset(self, ids: np.ndarray, positions: np.ndarray) -> None:
        self.ids = np.asarray(ids, dtype=np.int64).copy()
        self.positions = np.asarray(positions, dtype=float).reshape(-1, 2).copy()
        self.belief = IntentionBelief.uniform(len(self.ids), self.goals)

    def observe(self, ids: np.ndarray, positions: np.ndarray, speeds: Optional[np.ndarray] = None, dt: Optional[float] = None) -> IntentionBelief:
        """Update from the next observation of the population."""
        ids = np.asarray(ids, dtype=np.int64)
        positions = np.asarray(positions, dtype=float).reshape(-1, 2)
        survived = np.isin(self.ids, ids)
        n_surv = int(survived.sum())
        if not np.array_equal(ids[:n_surv], self.ids[survived]):
            raise ValueError("observed population is not aligned with tracked pedestrians")
        departed = np.flatnonzero(~survived)
        b = handle_population_change(self.belief, departed, 0)
        b = update_belief(b, self.positions[survived], positions[:n_surv], speeds, dt, self.params)
        self.belief = handle_population_change(b, [], len(ids) - n_surv)
        self.ids = ids.copy()
        self.positions = positions.copy()
        return self.belief
