"""Fast Marching travel-time field and gradient-descent headings.

Grids are indexed [i, j] with i along x and j along y; cell (i, j) covers
[i*cell, (i+1)*cell) x [j*cell, (j+1)*cell).
"""

import heapq
import logging
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd

from ..exceptions import DeadStateError, FieldSolveError
from ..models.params import FieldParams
from ..models.world import Environment

logger = logging.getLogger(__name__)

Index = Tuple[int, int]

# 8-neighbourhood in a fixed order; the order breaks ties between equally low neighbours.
_OFFSETS = np.array([(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)])


@dataclass(frozen=True)
class SpeedGrid:
    """Binary front speed: F = 0 on obstacle cells, 1 elsewhere."""

    cell: float
    speed: np.ndarray

    @classmethod
    def from_environment(cls, env: Environment, cell: float, margin: float) -> 'SpeedGrid':
        """Block every cell whose center is closer than margin + half a diagonal to an obstacle."""
        nx = int(math.ceil(env.width / cell))
        ny = int(math.ceil(env.height / cell))
        ci = (np.arange(nx) + 0.5) * cell
        cj = (np.arange(ny) + 0.5) * cell
        centers = np.stack(np.meshgrid(ci, cj, indexing='ij'), axis=-1)
        clearance = env.clearance_array(centers)
        blocked = clearance < margin + cell * math.sqrt(2.0) / 2.0
        return cls(cell=cell, speed=np.where(blocked, 0.0, 1.0))

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.speed.shape[0]), int(self.speed.shape[1]))

    @property
    def free(self) -> np.ndarray:
        return self.speed > 0

    def cell_of(self, p: Tuple[float, float]) -> Index:
        return (int(math.floor(p[0] / self.cell)), int(math.floor(p[1] / self.cell)))

    def center(self, idx: Index) -> Tuple[float, float]:
        return ((idx[0] + 0.5) * self.cell, (idx[1] + 0.5) * self.cell)


@dataclass(frozen=True)
class TravelTimeGrid:
    """Arrival times from the source plus the Sobel descent field."""

    cell: float
    times: np.ndarray
    source: Index
    source_point: Tuple[float, float]
    gradient: np.ndarray
    degenerate: np.ndarray
    fallback: np.ndarray
    monotone: bool = True

    @property
    def shape(self) -> Tuple[int, int]:
        return (int(self.times.shape[0]), int(self.times.shape[1]))

    def cells_of(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Cell indices of points (B, 2) plus an in-grid mask."""
        i = np.floor(points[:, 0] / self.cell).astype(np.int64)
        j = np.floor(points[:, 1] / self.cell).astype(np.int64)
        inside = (i >= 0) & (i < self.shape[0]) & (j >= 0) & (j < self.shape[1])
        return np.clip(i, 0, self.shape[0] - 1), np.clip(j, 0, self.shape[1] - 1), inside

    def time_at(self, points: np.ndarray) -> np.ndarray:
        i, j, inside = self.cells_of(np.asarray(points, dtype=float).reshape(-1, 2))
        return np.where(inside, self.times[i, j], np.inf)


def _line_of_sight(free: np.ndarray, cell: float, a: Tuple[float, float], b: Tuple[float, float]) -> bool:
    n = max(2, int(math.ceil(math.hypot(b[0] - a[0], b[1] - a[1]) / (cell / 4.0))) + 1)
    xs = np.linspace(a[0], b[0], n)
    ys = np.linspace(a[1], b[1], n)
    i = np.clip(np.floor(xs / cell).astype(int), 0, free.shape[0] - 1)
    j = np.clip(np.floor(ys / cell).astype(int), 0, free.shape[1] - 1)
    return bool(np.all(free[i, j]))


def solve_eikonal(
    grid: SpeedGrid,
    source: Index,
    source_point: Optional[Tuple[float, float]] = None,
    exact_radius: float = 5.0,
) -> TravelTimeGrid:
    """First-order Sethian upwind solve of 1 = F|grad T| from the source cell.

    Free cells with line of sight to the source point within exact_radius get their
    Euclidean distance; the narrow band then propagates outward in heap order.
    """
    nx, ny = grid.shape
    si, sj = source
    if not (0 <= si < nx and 0 <= sj < ny):
        raise FieldSolveError(f"source {source} outside the {nx}x{ny} grid")
    if not grid.free[si, sj]:
        raise FieldSolveError(f"source {source} lies in an obstacle cell")
    free = grid.free
    h = grid.cell
    sp = source_point if source_point is not None else grid.center(source)

    T = np.full((nx, ny), np.inf)
    known = np.zeros((nx, ny), dtype=bool)
    T[si, sj] = 0.0
    known[si, sj] = True

    if exact_radius > 0:
        r = int(math.ceil(exact_radius / h)) + 1
        for i in range(max(0, si - r), min(nx, si + r + 1)):
            for j in range(max(0, sj - r), min(ny, sj + r + 1)):
                if known[i, j] or not free[i, j]:
                    continue
                c = ((i + 0.5) * h, (j + 0.5) * h)
                d = math.hypot(c[0] - sp[0], c[1] - sp[1])
                if d <= exact_radius and _line_of_sight(free, h, sp, c):
                    T[i, j] = d
                    known[i, j] = True

    def upwind(i: int, j: int) -> float:
        a = min(T[i - 1, j] if i > 0 and known[i - 1, j] else math.inf,
                T[i + 1, j] if i < nx - 1 and known[i + 1, j] else math.inf)
        b = min(T[i, j - 1] if j > 0 and known[i, j - 1] else math.inf,
                T[i, j + 1] if j < ny - 1 and known[i, j + 1] else math.inf)
        if abs(a - b) >= h:
            return min(a, b) + h
        return (a + b + math.sqrt(2.0 * h * h - (a - b) ** 2)) / 2.0

    band: List[Tuple[float, int, int]] = []

    def relax_neighbours(i: int, j: int) -> None:
        for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
            if 0 <= ni < nx and 0 <= nj < ny and free[ni, nj] and not known[ni, nj]:
                t = upwind(ni, nj)
                if t < T[ni, nj]:
                    T[ni, nj] = t
                    heapq.heappush(band, (t, ni, nj))

    for i, j in zip(*np.nonzero(known)):
        relax_neighbours(int(i), int(j))

    monotone = True
    last = -math.inf
    while band:
        t, i, j = heapq.heappop(band)
        if known[i, j] or t > T[i, j]:
            continue
        if t < last - 1e-12:
            monotone = False
        last = max(last, t)
        known[i, j] = True
        relax_neighbours(i, j)

    if not monotone:
        logger.warning("Fast marching front popped out of order")
    gradient, degenerate = sobel_gradient(T)
    return TravelTimeGrid(
        cell=h, times=T, source=source, source_point=(float(sp[0]), float(sp[1])),
        gradient=gradient, degenerate=degenerate, fallback=_lowest_neighbours(T), monotone=monotone,
    )


def sobel_gradient(times: np.ndarray | TravelTimeGrid) -> Tuple[np.ndarray, np.ndarray]:
    """Unit gradient directions of T from 3x3 Sobel kernels, plus a degenerate mask.

    Infinite or out-of-grid neighbours take the center value; infinite cells and
    zero responses get a zero vector and are flagged degenerate.
    """
    T = times.times if isinstance(times, TravelTimeGrid) else np.asarray(times, dtype=float)
    nx, ny = T.shape
    finite = np.isfinite(T)
    center = np.where(finite, T, 0.0)
    padded = np.pad(T, 1, mode='constant', constant_values=np.inf)
    gx = np.zeros_like(center)
    gy = np.zeros_like(center)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny]
            nb = np.where(np.isfinite(nb), nb, center)
            gx += di * (2 if dj == 0 else 1) * nb
            gy += dj * (2 if di == 0 else 1) * nb
    g = np.stack([gx, gy], axis=-1)
    norm = np.linalg.norm(g, axis=-1)
    scale = np.abs(center).max() if finite.any() else 1.0
    degenerate = ~finite | (norm <= 1e-12 * max(scale, 1.0))
    unit = np.where(degenerate[..., None], 0.0, g / np.where(degenerate, 1.0, norm)[..., None])
    return unit, degenerate


def _lowest_neighbours(T: np.ndarray) -> np.ndarray:
    """Per cell, index into _OFFSETS of the lowest strictly smaller 8-neighbour, or -1."""
    nx, ny = T.shape
    padded = np.pad(T, 1, mode='constant', constant_values=np.inf)
    stack = np.stack([padded[1 + di:1 + di + nx, 1 + dj:1 + dj + ny] for di, dj in _OFFSETS])
    best = np.argmin(stack, axis=0)
    lowest = np.take_along_axis(stack, best[None], axis=0)[0]
    return np.where(np.isfinite(T) & (lowest < T), best, -1)


def next_heading_batch(t: TravelTimeGrid, points: np.ndarray, alpha: float = 1.0) -> Tuple[np.ndarray, np.ndarray]:
    """Descent headings for points (B, 2); returns (headings, valid mask)."""
    points = np.asarray(points, dtype=float).reshape(-1, 2)
    i, j, inside = t.cells_of(points)
    tc = np.where(inside, t.times[i, j], np.inf)
    valid = np.isfinite(tc)
    direction = -t.gradient[i, j]
    probe = points + alpha * t.cell * direction
    pi, pj, pin = t.cells_of(probe)
    probe_ok = valid & pin & ~t.degenerate[i, j] & (t.times[pi, pj] < tc)

    fb = t.fallback[i, j]
    off = _OFFSETS[np.maximum(fb, 0)]
    target = (np.stack([i, j], axis=-1) + off + 0.5) * t.cell
    fallback_ok = valid & (fb >= 0)

    heading = np.where(
        probe_ok,
        np.arctan2(direction[:, 1], direction[:, 0]),
        np.arctan2(target[:, 1] - points[:, 1], target[:, 0] - points[:, 0]),
    )
    at_source = valid & (i == t.source[0]) & (j == t.source[1])
    to_source = np.arctan2(t.source_point[1] - points[:, 1], t.source_point[0] - points[:, 0])
    heading = np.where(at_source, to_source, heading)
    return heading, at_source | probe_ok | fallback_ok


def fmm_next_heading(t: TravelTimeGrid, p: Tuple[float, float], alpha: float = 1.0) -> float:
    """Heading opposite the T gradient at p; raises DeadStateError in unreachable cells."""
    heading, valid = next_heading_batch(t, np.array([p], dtype=float), alpha)
    if not valid[0]:
        raise DeadStateError(f"no descent direction at {p}")
    return float(heading[0])


def descend(
    t: TravelTimeGrid, start: Tuple[float, float], alpha: float = 1.0, max_steps: Optional[int] = None
) -> Tuple[List[Tuple[float, float]], bool]:
    """Follow the field from start until within one cell of the source.

    Steps that would not enter a strictly lower cell snap to the lowest neighbour's
    center instead, so every step lowers T and descent cannot cycle.
    """
    nx, ny = t.shape
    limit = max_steps if max_steps is not None else 4 * (nx + ny)
    p = np.array(start, dtype=float)
    path = [(float(p[0]), float(p[1]))]
    for _ in range(limit + 1):
        i, j, inside = t.cells_of(p[None])
        if not inside[0] or not np.isfinite(t.times[i[0], j[0]]):
            return path, False
        if max(abs(int(i[0]) - t.source[0]), abs(int(j[0]) - t.source[1])) <= 1:
            return path, True
        if len(path) > limit:
            break
        direction = -t.gradient[i[0], j[0]]
        probe = p + alpha * t.cell * direction
        pi, pj, pin = t.cells_of(probe[None])
        if pin[0] and not t.degenerate[i[0], j[0]] and t.times[pi[0], pj[0]] < t.times[i[0], j[0]]:
            p = probe
        else:
            fb = t.fallback[i[0], j[0]]
            if fb < 0:
                return path, False
            p = (np.array([i[0], j[0]]) + _OFFSETS[fb] + 0.5) * t.cell
        path.append((float(p[0]), float(p[1])))
    return path, False


def build_travel_time_grid(env: Environment, field: FieldParams, d_obs: float) -> TravelTimeGrid:
    """Solve the field for an environment with the vehicle goal as source."""
    grid = SpeedGrid.from_environment(env, field.cell, d_obs)
    source = grid.cell_of(env.vehicle_goal)
    source = (min(source[0], grid.shape[0] - 1), min(source[1], grid.shape[1] - 1))
    field_t = solve_eikonal(grid, source, env.vehicle_goal, field.exact_radius)
    reachable = int(np.isfinite(field_t.times).sum())
    logger.info(f"Solved travel-time field for {env.name}: {grid.shape[0]}x{grid.shape[1]} cells, {reachable} reachable")
    return field_t


def field_frame(t: TravelTimeGrid) -> pd.DataFrame:
    """Long-format dump of T and the descent field for inspection."""
    nx, ny = t.shape
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing='ij')
    return pd.DataFrame({
        'i': i.ravel(),
        'j': j.ravel(),
        'x': ((i + 0.5) * t.cell).ravel(),
        'y': ((j + 0.5) * t.cell).ravel(),
        'time': t.times.ravel(),
        'grad_x': t.gradient[..., 0].ravel(),
        'grad_y': t.gradient[..., 1].ravel(),
        'degenerate': t.degenerate.ravel(),
    })
