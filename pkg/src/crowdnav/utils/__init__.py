"""Utility modules for the crowdnav application."""

from .geometry import point_segment_distance, segment_clearance, segments_clear, wrap_angle
from .log_writer import ResultWriter, read_episode_csv, read_jsonl
from .seed_utils import array_id, derive_seed, derive_uuid, trial_seed

__all__ = [
    'ResultWriter', 'array_id', 'derive_seed', 'derive_uuid', 'point_segment_distance',
    'read_episode_csv', 'read_jsonl', 'segment_clearance', 'segments_clear', 'trial_seed',
    'wrap_angle',
]
