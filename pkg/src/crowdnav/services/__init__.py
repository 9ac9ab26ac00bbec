"""Services for the crowdnav application.

Only the model-level services are re-exported here; the planner, simulator and
value services import the planners package and are imported by module path.
"""

from .belief_service import BeliefTracker, IntentionBelief, sample_scenarios, update_belief
from .pomdp_service import generative_step, legal_actions, reward, speed_actions
from .scenario_service import ScenarioService, build_scenario, get_scenario_service, nearest_pedestrians

__all__ = [
    'BeliefTracker',
    'IntentionBelief',
    'ScenarioService',
    'build_scenario',
    'generative_step',
    'get_scenario_service',
    'legal_actions',
    'nearest_pedestrians',
    'reward',
    'sample_scenarios',
    'speed_actions',
    'update_belief',
]
