"""Tests for the Fast Marching travel-time field and its descent headings."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest

# Add src to path
PROJECT_ROOT = Path(__file__).parent.parent.parent
sys.path.insert(0, str(PROJECT_ROOT / 'src'))

from crowdnav.exceptions import DeadStateError, FieldSolveError
from crowdnav.models.params import FieldParams
from crowdnav.models.world import ScenarioId
from crowdnav.planners.fmm_planner import (
    SpeedGrid,
    build_travel_time_grid,
    descend,
    field_frame,
    fmm_next_heading,
    next_heading_batch,
    sobel_gradient,
    solve_eikonal,
)
from crowdnav.services.scenario_service import build_scenario


def _euclidean(t, min_distance):
    nx, ny = t.shape
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing='ij')
    cx = (i + 0.5) * t.cell
    cy = (j + 0.5) * t.cell
    d = np.hypot(cx - t.source_point[0], cy - t.source_point[1])
    return d, d >= min_distance


def _relative_error(t, min_distance=3.0):
    d, mask = _euclidean(t, min_distance)
    return np.abs(t.times[mask] - d[mask]) / d[mask]


@pytest.fixture(scope="module")
def open_field_unit():
    return solve_eikonal(SpeedGrid(cell=1.0, speed=np.ones((101, 101))), (50, 50))


class TestEikonalSolve:
    """Arrival times on open and obstructed grids."""

    def test_open_grid_accuracy(self, open_field_unit):
        """Relative error against Euclidean distance stays within 5% away from the source."""
        assert open_field_unit.times[50, 50] == 0.0
        assert _relative_error(open_field_unit).max() <= 0.05
        assert open_field_unit.monotone

    def test_axis_cells_are_exact(self, open_field_unit):
        """Along the grid axes first-order marching is exact."""
        assert open_field_unit.times[90, 50] == pytest.approx(40.0)
        assert open_field_unit.times[50, 10] == pytest.approx(40.0)

    def test_refinement_reduces_error(self, open_field_unit):
        """Halving the cell size over the same region lowers the worst-case error."""
        fine = solve_eikonal(SpeedGrid(cell=0.5, speed=np.ones((201, 201))), (100, 100))
        coarse_err = _relative_error(open_field_unit).max()
        fine_err = _relative_error(fine).max()
        assert fine_err < coarse_err

    def test_blocked_source(self):
        """A source inside an obstacle cell cannot be solved."""
        speed = np.ones((20, 20))
        speed[5, 5] = 0.0
        with pytest.raises(FieldSolveError):
            solve_eikonal(SpeedGrid(cell=1.0, speed=speed), (5, 5))

    def test_source_outside_grid(self):
        """A source outside the grid cannot be solved."""
        with pytest.raises(FieldSolveError):
            solve_eikonal(SpeedGrid(cell=1.0, speed=np.ones((10, 10))), (10, 3))

    def test_wall_forces_detour(self):
        """Times never undercut straight-line distance and a wall forces a long way round."""
        speed = np.ones((101, 101))
        speed[50, :80] = 0.0
        t = solve_eikonal(SpeedGrid(cell=1.0, speed=speed), (30, 40))
        d, mask = _euclidean(t, 0.0)
        finite = np.isfinite(t.times)
        assert np.all(t.times[finite] >= d[finite] - 0.25)
        assert np.isinf(t.times[50, 10])
        assert t.times[70, 40] > 1.5 * d[70, 40]


class TestDescentField:
    """Gradient directions and headings."""

    def test_gradient_points_away_from_source(self, open_field_unit):
        """Descent from the east side of the source heads west."""
        heading = fmm_next_heading(open_field_unit, (80.5, 50.5))
        assert math.cos(heading) == pytest.approx(-1.0, abs=1e-6)

    def test_diagonal_heading(self, open_field_unit):
        """From the north-east diagonal the heading points back south-west."""
        heading = fmm_next_heading(open_field_unit, (80.5, 80.5))
        assert heading == pytest.approx(-3 * math.pi / 4, abs=0.05)

    def test_unreachable_cell_is_dead(self):
        """A query inside an obstacle has no descent direction."""
        speed = np.ones((40, 40))
        speed[20:30, 20:30] = 0.0
        t = solve_eikonal(SpeedGrid(cell=1.0, speed=speed), (5, 5))
        with pytest.raises(DeadStateError):
            fmm_next_heading(t, (25.5, 25.5))
        _, valid = next_heading_batch(t, np.array([[25.5, 25.5], [35.5, 35.5]]))
        assert valid.tolist() == [False, True]

    def test_sobel_on_linear_ramp(self):
        """A linear ramp gives its own direction everywhere inside."""
        i, j = np.meshgrid(np.arange(10.0), np.arange(10.0), indexing='ij')
        unit, degenerate = sobel_gradient(3.0 * i + 4.0 * j)
        np.testing.assert_allclose(unit[1:-1, 1:-1, 0], 0.6)
        np.testing.assert_allclose(unit[1:-1, 1:-1, 1], 0.8)
        assert not degenerate.any()

    def test_sobel_flat_is_degenerate(self):
        """A constant field has no direction."""
        _, degenerate = sobel_gradient(np.full((5, 5), 2.0))
        assert degenerate.all()

    def test_descent_reaches_source_from_every_free_cell(self):
        """On a coarse Scenario 2 grid, descent from each reachable cell ends at the goal."""
        env = build_scenario(ScenarioId.SCATTERED)
        t = build_travel_time_grid(env, FieldParams(cell=2.0), d_obs=1.0)
        nx, ny = t.shape
        for i in range(nx):
            for j in range(ny):
                if not np.isfinite(t.times[i, j]):
                    continue
                path, reached = descend(t, ((i + 0.5) * t.cell, (j + 0.5) * t.cell))
                assert reached, f"descent from cell {(i, j)} stalled after {len(path)} steps"


class TestFieldForEnvironment:
    """Field construction from a scenario."""

    def test_goal_is_source(self):
        """The vehicle goal cell has zero travel time."""
        env = build_scenario(ScenarioId.OPEN_FIELD)
        t = build_travel_time_grid(env, FieldParams(), d_obs=1.0)
        assert t.shape == (100, 100)
        assert t.source == (90, 90)
        assert t.times[90, 90] == 0.0
        assert np.isfinite(t.times).all()

    def test_obstacles_are_unreachable(self):
        """Cells covered by obstacles stay at infinity."""
        env = build_scenario(ScenarioId.L_LOBBY)
        t = build_travel_time_grid(env, FieldParams(), d_obs=1.0)
        assert np.isinf(t.times[75, 25])
        assert np.isfinite(t.times[10, 10])

    def test_field_frame(self, open_field_unit):
        """The long-format dump has one row per cell."""
        frame = field_frame(open_field_unit)
        assert len(frame) == 101 * 101
        assert {'x', 'y', 'time', 'grad_x', 'grad_y', 'degenerate'} <= set(frame.columns)


if __name__ == "__main__":
    pytest.main([__file__])
