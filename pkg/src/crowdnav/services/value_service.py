"""Monte Carlo policy evaluation at a belief."""

import logging
from typing import Optional

import numpy as np

from ..models.experiment import PolicyValueEstimate
from ..models.params import KinematicsParams, RewardParams
from ..models.state import POMDPState
from ..models.world import Environment
from ..planners.rollout_policies import Policy, simulate_policy
from ..utils.seed_utils import array_id
from .belief_service import IntentionBelief, sample_scenarios

logger = logging.getLogger(__name__)


def monte_carlo_policy_value(
    policy: Policy,
    belief: IntentionBelief,
    state: POMDPState,
    rollouts: int,
    horizon: int = 200,
    seed: int = 0,
    params: Optional[RewardParams] = None,
    kin: Optional[KinematicsParams] = None,
    env: Optional[Environment] = None,
) -> PolicyValueEstimate:
    """Mean discounted return of the policy over particles drawn from the belief.

    Each roll-out draws its pedestrian goals from the belief and its noise from the
    particle's own seed, so the estimate is a pure function of the seed.
    """
    if rollouts < 1:
        raise ValueError("rollouts must be >= 1")
    params = params or RewardParams()
    kin = kin or KinematicsParams()
    particles = sample_scenarios(belief, state, rollouts, seed)
    returns = np.array([
        simulate_policy(policy, p.state, np.random.default_rng(p.seed), horizon, params, kin, env)
        for p in particles
    ])
    sem = float(returns.std(ddof=1) / np.sqrt(rollouts)) if rollouts > 1 else 0.0
    belief_id = array_id(belief.weights, state.pedestrian_positions(), salt=seed)
    logger.debug(f"Policy value at {belief_id}: {returns.mean():.3f} ± {sem:.3f} over {rollouts} roll-outs")
    return PolicyValueEstimate(
        belief_id=belief_id, value=float(returns.mean()), sem=sem, horizon=horizon, rollouts=rollouts
    )
