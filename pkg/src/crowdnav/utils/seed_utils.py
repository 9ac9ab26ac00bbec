"""Deterministic seed and id derivation."""

import hashlib
import uuid
from typing import Union

import numpy as np

# Namespace for crowdnav ids (using DNS namespace as base)
CROWDNAV_UUID_NAMESPACE = uuid.UUID('6ba7b810-9dad-11d1-80b4-00c04fd430c8')

SeedPart = Union[int, str, float]


def derive_uuid(*parts: SeedPart) -> uuid.UUID:
    """
    Deterministic UUID for a tuple of parts.

    Same parts always give the same UUID, across processes and restarts, so
    paired planners and parallel workers agree on every derived seed.

    Example:
        >>> derive_uuid(7, 'world') == derive_uuid(7, 'world')
        True
    """
    content = ":".join(str(p).strip().lower() for p in parts)
    return uuid.uuid5(CROWDNAV_UUID_NAMESPACE, content)


def derive_seed(*parts: SeedPart) -> int:
    """63-bit seed derived from parts, usable with numpy.random.default_rng."""
    return derive_uuid(*parts).int & ((1 << 63) - 1)


def trial_seed(base_seed: int, population: int, trial: int) -> int:
    """World seed shared by every planner in one experiment trial."""
    return derive_seed('trial', base_seed, population, trial) % (1 << 31)


def array_id(*arrays: np.ndarray, salt: SeedPart = '') -> str:
    """Deterministic id for numeric content, e.g. a belief matrix."""
    digest = hashlib.sha1()
    for a in arrays:
        digest.update(np.ascontiguousarray(a, dtype=float).tobytes())
    return str(derive_uuid(digest.hexdigest(), salt))
