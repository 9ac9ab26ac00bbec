"""Command-line interface commands."""

import asyncio
import logging
import os
import sys
from typing import Optional

import click

from ..config import app_config, run_config
from ..models.experiment import PlannerKind
from ..models.params import PlannerSettings, VehicleKind
from ..planners.fmm_planner import build_travel_time_grid, field_frame
from ..planners.prm_planner import build_roadmap, roadmap_frames
from ..services.planner_service import apply_budget
from ..services.scenario_service import build_scenario
from ..services.simulator_service import run_episode
from ..utils.log_writer import ResultWriter, read_episode_csv
from ..utils.seed_utils import derive_seed
from ..workflows.experiment_workflow import aggregate, load_experiment_spec, run_experiment, travel_time_ratios

_PLANNERS = [p.value for p in PlannerKind]


@click.group()
def main() -> None:
    """crowdnav CLI - POMDP planning for vehicles navigating among pedestrians."""
    logging.basicConfig(
        level=app_config.log_level,
        format='%(asctime)s %(levelname)s %(name)s: %(message)s',
    )


@main.command()
@click.argument('spec_file')
@click.option('--seed', type=int, default=None, help='Base seed (overrides BASE_SEED)')
@click.option('--budget', type=float, default=None, help='Planning budget per step in seconds')
@click.option('--trials', type=int, default=None, help='Trials per population')
@click.option('--iteration-cap', type=int, default=None, help='Search iteration cap; makes runs deterministic')
@click.option('--out', 'output_dir', default=None, help='Output directory (default: CROWDNAV_OUTPUT_DIR)')
@click.option('--workers', type=int, default=None, help='Parallel worker processes')
@click.option('--no-trajectories', is_flag=True, help='Skip the per-episode JSON-lines logs')
@click.option('--strict-safety', is_flag=True, help='Exit with status 2 if any trajectory is unsafe')
def run(
    spec_file: str,
    seed: Optional[int],
    budget: Optional[float],
    trials: Optional[int],
    iteration_cap: Optional[int],
    output_dir: Optional[str],
    workers: Optional[int],
    no_trajectories: bool,
    strict_safety: bool,
) -> None:
    """Run a batch experiment from a KEY=value spec file."""
    unsafe = asyncio.run(_run(spec_file, seed, budget, trials, iteration_cap, output_dir, workers, no_trajectories))
    if strict_safety and unsafe:
        click.echo(f"❌ {unsafe} unsafe trajectories")
        sys.exit(2)


async def _run(
    spec_file: str,
    seed: Optional[int],
    budget: Optional[float],
    trials: Optional[int],
    iteration_cap: Optional[int],
    output_dir: Optional[str],
    workers: Optional[int],
    no_trajectories: bool,
) -> int:
    """Run the experiment and return the unsafe count."""
    try:
        spec = load_experiment_spec(
            spec_file, base_seed=seed, budget_s=budget, trials=trials, iteration_cap=iteration_cap
        )
        out = output_dir or str(app_config.output_dir)
        click.echo(
            f"🚗 {spec.scenario.value} / {spec.vehicle.value}: "
            f"{', '.join(p.value for p in spec.planners)} x populations {spec.populations} x {spec.trials} trials"
        )
        result = await run_experiment(spec, out, workers, write_trajectories=not no_trajectories)
        click.echo(result.table.to_text())
        for population, ratios in travel_time_ratios(result.table).items():
            parts = ', '.join(f"{planner} {ratio:.3f}" for planner, ratio in ratios.items())
            click.echo(f"📊 population {population}: travel time vs {spec.baseline.value}: {parts}")
        click.echo(f"✅ Wrote {len(result.results)} episodes to {result.outputs.get('episodes')}")
        return result.unsafe_count
    except Exception as e:
        click.echo(f"❌ Experiment failed: {str(e)}")
        sys.exit(1)


@main.command()
@click.argument('csv_file')
@click.option('--baseline', type=click.Choice(_PLANNERS), default=PlannerKind.LS_ASTAR.value, help='Baseline planner')
@click.option('--out', 'output_file', default=None, help='Also write the table to this file')
def table(csv_file: str, baseline: str, output_file: Optional[str]) -> None:
    """Aggregate a raw episode CSV into the results table."""
    asyncio.run(_table(csv_file, baseline, output_file))


async def _table(csv_file: str, baseline: str, output_file: Optional[str]) -> None:
    try:
        frame = await read_episode_csv(csv_file)
        metrics = aggregate(frame, PlannerKind(baseline))
        click.echo(f"📊 {len(frame)} episodes from {csv_file}")
        click.echo(metrics.to_text())
        if output_file:
            writer = ResultWriter(os.path.dirname(output_file) or '.')
            path = await writer.write_text(metrics.to_text() + "\n", os.path.basename(output_file))
            click.echo(f"✅ Table written to {path}")
    except Exception as e:
        click.echo(f"❌ Error building table: {str(e)}")
        sys.exit(1)


@main.command('solve-field')
@click.argument('scenario')
@click.option('--vehicle', type=click.Choice([v.value for v in VehicleKind]), default=VehicleKind.HOLONOMIC.value)
@click.option('--seed', type=int, default=0, help='Roadmap sampling seed')
@click.option('--out', 'output_dir', default=None, help='Output directory (default: CROWDNAV_OUTPUT_DIR)')
def solve_field(scenario: str, vehicle: str, seed: int, output_dir: Optional[str]) -> None:
    """Dump the travel-time field and the roadmap of a scenario as CSV."""
    asyncio.run(_solve_field(scenario, VehicleKind(vehicle), seed, output_dir))


async def _solve_field(scenario: str, vehicle: VehicleKind, seed: int, output_dir: Optional[str]) -> None:
    try:
        env = build_scenario(scenario.upper())
        settings = PlannerSettings.for_vehicle(vehicle)
        f = settings.field
        d_obs = settings.reward.d_obs
        writer = ResultWriter(output_dir or str(app_config.output_dir / 'fields' / env.name))

        grid = build_travel_time_grid(env, f, d_obs)
        path = await writer.write_frame(field_frame(grid), "travel_time.csv")
        click.echo(f"✅ Travel-time field {grid.shape[0]}x{grid.shape[1]} written to {path}")
        if not grid.monotone:
            click.echo("⚠️  Field pop order was not monotone")

        roadmap = build_roadmap(env, f.n_prm, f.k_prm, derive_seed(seed, 'prm'), d_obs, f.prm_retries)
        nodes, edges = roadmap_frames(roadmap)
        nodes_path = await writer.write_frame(nodes, "roadmap_nodes.csv")
        await writer.write_frame(edges, "roadmap_edges.csv")
        click.echo(f"✅ Roadmap with {roadmap.size} nodes and {len(edges)} edges written to {nodes_path}")
    except Exception as e:
        click.echo(f"❌ Error solving field: {str(e)}")
        sys.exit(1)


@main.command()
@click.option('--scenario', default='OPEN_FIELD', help='Scenario tag')
@click.option('--planner', type=click.Choice(_PLANNERS), default=PlannerKind.ES_FMM.value)
@click.option('--vehicle', type=click.Choice([v.value for v in VehicleKind]), default=VehicleKind.HOLONOMIC.value)
@click.option('--population', type=int, default=50, help='Number of pedestrians')
@click.option('--seed', type=int, default=0, help='World seed')
@click.option('--budget', type=float, default=None, help='Planning budget per step in seconds')
@click.option('--iteration-cap', type=int, default=None, help='Search iteration cap')
@click.option('--out', 'output_dir', default=None, help='Write the trajectory log here')
def episode(
    scenario: str,
    planner: str,
    vehicle: str,
    population: int,
    seed: int,
    budget: Optional[float],
    iteration_cap: Optional[int],
    output_dir: Optional[str],
) -> None:
    """Run a single episode and print its outcome."""
    asyncio.run(_episode(scenario, PlannerKind(planner), VehicleKind(vehicle), population, seed, budget, iteration_cap, output_dir))


async def _episode(
    scenario: str,
    planner: PlannerKind,
    vehicle: VehicleKind,
    population: int,
    seed: int,
    budget: Optional[float],
    iteration_cap: Optional[int],
    output_dir: Optional[str],
) -> None:
    try:
        env = build_scenario(scenario.upper())
        settings = apply_budget(
            PlannerSettings.for_vehicle(vehicle),
            budget if budget is not None else run_config.planning_budget_s,
            iteration_cap if iteration_cap is not None else run_config.iteration_cap,
        )
        click.echo(f"🚗 {env.name} {planner.value} population={population} seed={seed}")
        result = run_episode(env, planner, population, seed, settings, step_limit=run_config.step_limit)
        click.echo(
            f"📊 outcome={result.outcome.value} time={result.travel_time_s:.1f}s "
            f"sb={result.sb_count} unsafe={result.unsafe} steps={result.steps}"
        )
        if result.failure_message:
            click.echo(f"❌ {result.failure_message}")
        if output_dir:
            path = await ResultWriter(output_dir).write_trajectory(result)
            click.echo(f"✅ Trajectory written to {path}")
    except Exception as e:
        click.echo(f"❌ Error running episode: {str(e)}")
        sys.exit(1)
