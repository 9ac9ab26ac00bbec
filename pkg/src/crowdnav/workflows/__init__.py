"""Experiment workflows."""

from .activities import make_trial_jobs, run_trial
from .experiment_workflow import (
    ExperimentRun,
    aggregate,
    compare_outperform,
    load_experiment_spec,
    run_experiment,
    settings_for,
)

__all__ = [
    'ExperimentRun',
    'aggregate',
    'compare_outperform',
    'load_experiment_spec',
    'make_trial_jobs',
    'run_experiment',
    'run_trial',
    'settings_for',
]
