"""Trial jobs executed by the experiment workflow, in-process or in a worker pool."""

import logging
from typing import Any, Dict, List

from ..models.experiment import EpisodeResult, ExperimentSpec, PlannerKind
from ..models.params import PlannerSettings
from ..services.scenario_service import build_scenario
from ..services.simulator_service import run_episode
from ..utils.seed_utils import trial_seed

logger = logging.getLogger(__name__)


def make_trial_jobs(spec: ExperimentSpec, settings: PlannerSettings) -> List[Dict[str, Any]]:
    """One job per (population, trial, planner); planners in a trial share the world seed.

    Jobs are plain dicts so they pickle cheaply into worker processes.
    """
    settings_json = settings.model_dump_json()
    jobs = []
    for population in spec.populations:
        for trial in range(spec.trials):
            seed = trial_seed(spec.base_seed, population, trial)
            for planner in spec.planners:
                jobs.append({
                    'scenario': spec.scenario.value,
                    'planner': planner.value,
                    'population': population,
                    'trial': trial,
                    'seed': seed,
                    'step_limit': spec.step_limit,
                    'settings': settings_json,
                })
    return jobs


def run_trial(job: Dict[str, Any]) -> Dict[str, Any]:
    """Run one episode for a job and return the result as JSON-ready data."""
    env = build_scenario(job['scenario'])
    settings = PlannerSettings.model_validate_json(job['settings'])
    result = run_episode(
        env,
        PlannerKind(job['planner']),
        job['population'],
        job['seed'],
        settings,
        trial=job['trial'],
        step_limit=job['step_limit'],
    )
    return result.model_dump(mode='json')


def job_sort_key(result: EpisodeResult, planners: List[PlannerKind]) -> tuple[int, int, int]:
    return (result.population, result.trial, planners.index(result.planner))
