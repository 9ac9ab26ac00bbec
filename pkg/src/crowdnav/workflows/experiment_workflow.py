"""Batch experiments: paired-seed episode runs and results tables."""

import asyncio
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import ValidationError

from ..config import run_config
from ..exceptions import ConfigError
from ..models.experiment import (
    CSV_COLUMNS,
    EpisodeResult,
    ExperimentSpec,
    MetricsRow,
    MetricsTable,
    Outcome,
    PlannerKind,
)
from ..models.params import PlannerSettings
from ..services.planner_service import apply_budget
from ..services.scenario_service import read_key_values
from ..utils.log_writer import ResultWriter
from .activities import job_sort_key, make_trial_jobs, run_trial

logger = logging.getLogger(__name__)

# Spec-file keys that describe the experiment; every other key is a parameter override.
_SPEC_KEYS = {
    'SCENARIO': 'scenario',
    'VEHICLE': 'vehicle',
    'PLANNERS': 'planners',
    'POPULATIONS': 'populations',
    'TRIALS': 'trials',
    'BASE_SEED': 'base_seed',
    'BUDGET_S': 'budget_s',
    'ITERATION_CAP': 'iteration_cap',
    'STEP_LIMIT': 'step_limit',
    'BASELINE': 'baseline',
}
_LIST_KEYS = {'planners', 'populations'}


def _split_list(raw: str) -> List[str]:
    return [item.strip() for item in raw.replace(';', ',').split(',') if item.strip()]


def load_experiment_spec(path: str | Path, **updates: Any) -> ExperimentSpec:
    """Read a KEY=value experiment file; non-None keyword updates win over the file."""
    try:
        values = read_key_values(Path(path))
    except FileNotFoundError as e:
        raise ConfigError(str(e)) from e

    data: Dict[str, Any] = {}
    overrides: Dict[str, str] = {}
    for key, raw in values.items():
        name = _SPEC_KEYS.get(key.upper())
        if name is None:
            overrides[key.upper()] = raw or ''
        elif raw not in (None, ''):
            data[name] = _split_list(raw) if name in _LIST_KEYS else raw
    data.update({k: v for k, v in updates.items() if v is not None})
    data['overrides'] = overrides
    try:
        spec = ExperimentSpec.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid experiment spec {path}: {e}") from e
    # Unknown override keys surface here rather than inside a worker.
    settings_for(spec)
    return spec


def settings_for(spec: ExperimentSpec) -> PlannerSettings:
    """Planner settings for a spec: vehicle defaults, overrides, then budget and caps."""
    settings = PlannerSettings.from_mapping(spec.overrides, spec.vehicle)
    return apply_budget(settings, spec.budget_s, spec.iteration_cap)


def compare_outperform(times_baseline: Sequence[float], times_candidate: Sequence[float]) -> int:
    """Number of paired trials where the candidate is strictly faster than the baseline."""
    if len(times_baseline) != len(times_candidate):
        raise ValueError(
            f"paired lists differ in length: {len(times_baseline)} != {len(times_candidate)}"
        )
    return int(sum(c < b for b, c in zip(times_baseline, times_candidate)))


def _mean_sem(values: pd.Series) -> tuple[float, float]:
    if values.empty:
        return 0.0, 0.0
    sem = values.sem(ddof=1)
    return float(values.mean()), 0.0 if pd.isna(sem) else float(sem)


def aggregate(frame: pd.DataFrame, baseline: PlannerKind = PlannerKind.LS_ASTAR) -> MetricsTable:
    """Aggregate raw episode rows into per-(scenario, population, planner) metrics.

    Planner failures are counted but excluded from means and from paired comparisons.
    """
    table = MetricsTable(baseline=baseline)
    if frame.empty:
        return table
    ok = frame[frame['outcome'] != Outcome.PLANNER_FAILURE.value]
    base_rows = ok[ok['planner'] == baseline.value]

    for (scenario, vehicle, population, planner), group in frame.groupby(
        ['scenario', 'vehicle', 'population', 'planner'], sort=False
    ):
        done = group[group['outcome'] != Outcome.PLANNER_FAILURE.value]
        mean_t, sem_t = _mean_sem(done['travel_time_s'].astype(float))
        mean_sb, sem_sb = _mean_sem(done['sb_count'].astype(float))

        outperform: Optional[int] = None
        ratio: Optional[float] = None
        if planner != baseline.value:
            base = base_rows[(base_rows['scenario'] == scenario) & (base_rows['population'] == population)]
            if not base.empty:
                paired = done.merge(base[['trial', 'travel_time_s']], on='trial', suffixes=('', '_base'))
                outperform = compare_outperform(
                    paired['travel_time_s_base'].tolist(), paired['travel_time_s'].tolist()
                )
                base_mean = float(base['travel_time_s'].mean())
                if base_mean > 0 and not done.empty:
                    ratio = mean_t / base_mean

        table.rows.append(MetricsRow(
            scenario=str(scenario),
            vehicle=str(vehicle),
            population=int(population),
            planner=str(planner),
            trials=len(group),
            completed=len(done),
            failures=len(group) - len(done),
            timeouts=int((group['outcome'] == Outcome.TIMEOUT.value).sum()),
            unsafe=int(group['unsafe'].astype(int).sum()),
            mean_travel_time_s=mean_t,
            sem_travel_time_s=sem_t,
            mean_sb=mean_sb,
            sem_sb=sem_sb,
            outperform=outperform,
            travel_time_ratio=ratio,
        ))
    return table


def results_frame(results: Sequence[EpisodeResult]) -> pd.DataFrame:
    return pd.DataFrame([r.csv_row() for r in results], columns=CSV_COLUMNS)


def metrics_frame(table: MetricsTable) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in table.rows], columns=list(MetricsRow.model_fields))


@dataclass
class ExperimentRun:
    """Everything one experiment produced."""

    spec: ExperimentSpec
    table: MetricsTable
    results: List[EpisodeResult]
    outputs: Dict[str, str] = field(default_factory=dict)

    @property
    def unsafe_count(self) -> int:
        return sum(1 for r in self.results if r.unsafe)


async def _run_jobs(jobs: List[Dict[str, Any]], workers: int) -> List[Dict[str, Any]]:
    if workers <= 1:
        done = []
        for n, job in enumerate(jobs, 1):
            done.append(run_trial(job))
            logger.info(f"Trial {n}/{len(jobs)} done: {job['planner']} population={job['population']} trial={job['trial']}")
        return done

    loop = asyncio.get_running_loop()
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [loop.run_in_executor(pool, run_trial, job) for job in jobs]
        logger.info(f"Dispatched {len(jobs)} trials to {workers} workers")
        return list(await asyncio.gather(*futures))


async def run_experiment(
    spec: ExperimentSpec,
    output_dir: Optional[str] = None,
    workers: Optional[int] = None,
    write_trajectories: bool = True,
) -> ExperimentRun:
    """Run every (population, trial, planner) episode and write the CSV, logs and tables.

    Results are sorted by (population, trial, planner order) before writing, so the CSV
    does not depend on the worker count.
    """
    settings = settings_for(spec)
    workers = workers if workers is not None else run_config.workers
    jobs = make_trial_jobs(spec, settings)
    logger.info(
        f"Experiment {spec.scenario.value}/{spec.vehicle.value}: {len(spec.planners)} planners x "
        f"{len(spec.populations)} populations x {spec.trials} trials = {len(jobs)} episodes"
    )

    raw = await _run_jobs(jobs, workers)
    results = sorted(
        (EpisodeResult.model_validate(r) for r in raw), key=lambda r: job_sort_key(r, spec.planners)
    )
    table = aggregate(results_frame(results), spec.baseline)
    run = ExperimentRun(spec=spec, table=table, results=results)

    if output_dir is not None:
        writer = ResultWriter(output_dir)
        run.outputs['episodes'] = await writer.write_episode_csv(results)
        run.outputs['metrics'] = await writer.write_frame(metrics_frame(table), "metrics.csv")
        run.outputs['table'] = await writer.write_text(table.to_text() + "\n", "metrics.txt")
        run.outputs['spec'] = await writer.write_text(spec.model_dump_json(indent=2) + "\n", "spec.json")
        if write_trajectories:
            for r in results:
                await writer.write_trajectory(r)
            run.outputs['trajectories'] = str(Path(output_dir) / "trajectories")
        logger.info(f"Wrote experiment outputs to {output_dir}")

    failures = sum(1 for r in results if r.outcome is Outcome.PLANNER_FAILURE)
    if failures:
        logger.warning(f"{failures} episodes ended in planner failure")
    return run


def travel_time_ratios(table: MetricsTable) -> Dict[int, Dict[str, float]]:
    """Per population, each planner's mean travel time over the baseline's."""
    ratios: Dict[int, Dict[str, float]] = {}
    for r in table.rows:
        if r.travel_time_ratio is not None and np.isfinite(r.travel_time_ratio):
            ratios.setdefault(r.population, {})[r.planner] = r.travel_time_ratio
    return ratios
