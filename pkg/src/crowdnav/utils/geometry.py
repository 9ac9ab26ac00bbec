"""Vectorized planar geometry helpers."""

from typing import Any

import numpy as np

from ..models.world import Environment


def wrap_angle(a: Any) -> Any:
    """Wrap angles into [-pi, pi). Scalars in, float out; arrays in, arrays out."""
    wrapped = (np.asarray(a, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi
    return wrapped if np.ndim(a) else float(wrapped)


def point_segment_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from points to segments a-b; all arguments broadcast over leading axes."""
    ab = b - a
    ap = points - a
    denom = np.sum(ab * ab, axis=-1)
    t = np.where(denom > 0, np.sum(ap * ab, axis=-1) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    closest = a + t[..., None] * ab
    return np.linalg.norm(points - closest, axis=-1)


def segment_clearance(env: Environment, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum obstacle clearance along segments a-b, shapes (..., 2) -> (...)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    shape = np.broadcast_shapes(a.shape, b.shape)[:-1]
    if not env.obstacles:
        return np.full(shape, np.inf)
    centers = env.obstacle_centers
    d = point_segment_distance(centers, a[..., None, :], b[..., None, :])
    return np.min(d - env.obstacle_radii, axis=-1)


def segments_clear(env: Environment, a: np.ndarray, b: np.ndarray, margin: float) -> np.ndarray:
    """Boolean mask: segment keeps at least `margin` from every obstacle."""
    return segment_clearance(env, a, b) >= margin
