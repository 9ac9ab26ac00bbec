"""Tests for experiment specs, aggregation, batch runs and the CLI."""

import sys
from pathlib import Path

import pandas as pd
import pytest
from click.testing import CliRunner

# Add src to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.cli import main
from crowdnav.exceptions import ConfigError
from crowdnav.models.experiment import CSV_COLUMNS, Outcome, PlannerKind
from crowdnav.models.params import VehicleKind
from crowdnav.models.world import ScenarioId
from crowdnav.workflows.experiment_workflow import (
    aggregate,
    compare_outperform,
    load_experiment_spec,
    run_experiment,
    settings_for,
)


def _row(planner, trial, time, outcome=Outcome.GOAL, sb=0, unsafe=0, population=10):
    return {
        'scenario': 'OPEN_FIELD',
        'vehicle': 'HOLONOMIC',
        'planner': planner.value,
        'population': population,
        'trial': trial,
        'seed': 100 + trial,
        'travel_time_s': time,
        'sb_count': sb,
        'unsafe': unsafe,
        'outcome': outcome.value,
    }


@pytest.fixture
def episodes_frame():
    rows = [_row(PlannerKind.LS_ASTAR, t, time, sb=t) for t, time in enumerate([10.0, 12.0, 14.0, 20.0])]
    rows += [_row(PlannerKind.ES_FMM, t, time) for t, time in enumerate([9.0, 13.0, 11.0])]
    rows.append(_row(PlannerKind.ES_FMM, 3, 0.0, outcome=Outcome.PLANNER_FAILURE))
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


@pytest.fixture
def spec_file(tmp_path):
    path = tmp_path / "small.conf"
    path.write_text(
        "# tiny experiment\n"
        "SCENARIO=OPEN_FIELD\n"
        "PLANNERS=ES_NHV_STRAIGHT\n"
        "POPULATIONS=3\n"
        "TRIALS=2\n"
        "BASE_SEED=4\n"
        "STEP_LIMIT=5\n"
        "ITERATION_CAP=2\n"
        "BASELINE=ES_NHV_STRAIGHT\n"
        "K_SCENARIOS=5\n"
        "MAX_DEPTH=2\n"
        "M_STEPS=5\n"
    )
    return path


class TestCompareOutperform:
    """Paired strict wins."""

    def test_counts_strict_wins(self):
        """Ties are not wins."""
        assert compare_outperform([10.0, 12.0, 14.0], [9.0, 12.0, 15.0]) == 1

    def test_empty(self):
        assert compare_outperform([], []) == 0

    def test_length_mismatch(self):
        """Unpaired lists are rejected."""
        with pytest.raises(ValueError):
            compare_outperform([1.0, 2.0], [1.0])


class TestAggregate:
    """Raw episode rows to the results table."""

    def test_baseline_row(self, episodes_frame):
        """The baseline has no comparison columns."""
        table = aggregate(episodes_frame, PlannerKind.LS_ASTAR)
        row = table.row(10, PlannerKind.LS_ASTAR)
        assert row.trials == 4 and row.completed == 4
        assert row.mean_travel_time_s == pytest.approx(14.0)
        assert row.mean_sb == pytest.approx(1.5)
        assert row.outperform is None
        assert row.travel_time_ratio is None

    def test_failures_are_excluded(self, episodes_frame):
        """Planner failures count as failures and stay out of means and pairs."""
        row = aggregate(episodes_frame, PlannerKind.LS_ASTAR).row(10, PlannerKind.ES_FMM)
        assert row.trials == 4
        assert row.completed == 3
        assert row.failures == 1
        assert row.mean_travel_time_s == pytest.approx(11.0)
        assert row.sem_travel_time_s == pytest.approx(2.0 / 3 ** 0.5)
        assert row.outperform == 2
        assert row.travel_time_ratio == pytest.approx(11.0 / 14.0)

    def test_empty_frame(self):
        assert aggregate(pd.DataFrame(columns=CSV_COLUMNS)).rows == []

    def test_text_table(self, episodes_frame):
        """The text table has a header and one line per cell."""
        text = aggregate(episodes_frame).to_text()
        lines = text.splitlines()
        assert len(lines) == 3
        assert "2/3" in lines[2]


class TestExperimentSpec:
    """KEY=value experiment files."""

    def test_load(self, spec_file):
        """Experiment keys go to the spec and the rest become overrides."""
        spec = load_experiment_spec(spec_file)
        assert spec.scenario is ScenarioId.OPEN_FIELD
        assert spec.vehicle is VehicleKind.HOLONOMIC
        assert spec.planners == [PlannerKind.ES_NHV_STRAIGHT]
        assert spec.populations == [3]
        assert spec.iteration_cap == 2
        assert spec.overrides == {'K_SCENARIOS': '5', 'MAX_DEPTH': '2', 'M_STEPS': '5'}
        settings = settings_for(spec)
        assert settings.solver.k_scenarios == 5
        assert settings.solver.iteration_cap == 2

    def test_updates_win(self, spec_file):
        """Keyword updates override the file and None is ignored."""
        spec = load_experiment_spec(spec_file, trials=7, base_seed=None)
        assert spec.trials == 7
        assert spec.base_seed == 4

    def test_population_list(self, tmp_path):
        path = tmp_path / "pops.conf"
        path.write_text("PLANNERS=ES_FMM, LS_ASTAR\nPOPULATIONS=50;100, 200\n")
        spec = load_experiment_spec(path)
        assert spec.planners == [PlannerKind.ES_FMM, PlannerKind.LS_ASTAR]
        assert spec.populations == [50, 100, 200]

    def test_unknown_override(self, tmp_path):
        """An unknown parameter key is a configuration error."""
        path = tmp_path / "bad.conf"
        path.write_text("PLANNERS=ES_FMM\nPOPULATIONS=10\nWARP_FACTOR=9\n")
        with pytest.raises(ConfigError):
            load_experiment_spec(path)

    def test_invalid_planner(self, tmp_path):
        path = tmp_path / "bad.conf"
        path.write_text("PLANNERS=ES_TELEPORT\nPOPULATIONS=10\n")
        with pytest.raises(ConfigError):
            load_experiment_spec(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_experiment_spec(tmp_path / "nope.conf")


class TestRunExperiment:
    """Small end-to-end batch runs."""

    @pytest.mark.asyncio
    async def test_outputs_are_reproducible(self, spec_file, tmp_path):
        """Two capped runs write byte-identical episode CSVs."""
        spec = load_experiment_spec(spec_file)
        first = await run_experiment(spec, str(tmp_path / "a"), workers=1)
        second = await run_experiment(spec, str(tmp_path / "b"), workers=1)

        assert len(first.results) == 2
        assert [r.trial for r in first.results] == [0, 1]
        csv_a = Path(first.outputs['episodes']).read_text()
        csv_b = Path(second.outputs['episodes']).read_text()
        assert csv_a == csv_b
        assert csv_a.splitlines()[0] == ",".join(CSV_COLUMNS)
        assert Path(first.outputs['table']).exists()
        assert len(list((tmp_path / "a" / "trajectories").glob("*.jsonl"))) == 2

    @pytest.mark.asyncio
    async def test_without_output_dir(self, spec_file):
        """Without an output directory nothing is written."""
        spec = load_experiment_spec(spec_file, trials=1)
        run = await run_experiment(spec, None, workers=1)
        assert run.outputs == {}
        assert len(run.table.rows) == 1


class TestCli:
    """Click commands."""

    def test_table_command(self, episodes_frame, tmp_path):
        """The table command aggregates a raw CSV."""
        csv_path = tmp_path / "episodes.csv"
        episodes_frame.to_csv(csv_path, index=False)
        out_path = tmp_path / "tables" / "metrics.txt"
        result = CliRunner().invoke(main, ['table', str(csv_path), '--out', str(out_path)])
        assert result.exit_code == 0
        assert "8 episodes" in result.output
        assert "ES_FMM" in result.output
        assert out_path.exists()

    def test_table_missing_file(self, tmp_path):
        result = CliRunner().invoke(main, ['table', str(tmp_path / "missing.csv")])
        assert result.exit_code == 1
        assert "❌" in result.output

    def test_run_missing_spec(self, tmp_path):
        """A missing spec file exits with status 1."""
        result = CliRunner().invoke(main, ['run', str(tmp_path / "missing.conf")])
        assert result.exit_code == 1
        assert "Experiment failed" in result.output


if __name__ == "__main__":
    pytest.main([__file__])
