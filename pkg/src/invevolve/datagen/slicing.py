"""Temporal slicing of a long series into fixed-length workspace windows."""
from __future__ import annotations

import numpy as np

HISTORY_DAYS = 100
EVALUATION_DAYS = 30
SLICE_DAYS = HISTORY_DAYS + EVALUATION_DAYS
MIN_SEPARATION = 15
MAX_RETRIES = 10_000


class SlicingError(RuntimeError):
    pass


def separated(starts, min_separation: int = MIN_SEPARATION, length: int = SLICE_DAYS) -> bool:
    """True when every pair of slice endpoints is at least ``min_separation`` days apart."""
    ends = np.sort(np.asarray(starts, dtype=int) + length - 1)
    return bool(np.all(np.diff(ends) >= min_separation))


def slice_starts(n_days: int, n_slices: int, seed: int = 0, length: int = SLICE_DAYS,
                 min_separation: int = MIN_SEPARATION, max_retries: int = MAX_RETRIES) -> list[int]:
    """Sorted start indices drawn uniformly subject to endpoint separation (rejection sampling)."""
    if n_slices < 1:
        raise ValueError("n_slices must be at least 1")
    n_pos = n_days - length + 1
    if n_pos < 1:
        raise SlicingError(f"series of {n_days} days is shorter than one {length}-day slice")
    rng = np.random.default_rng([seed, n_days, n_slices])
    for _ in range(max_retries):
        starts = rng.integers(0, n_pos, size=n_slices)
        if separated(starts, min_separation, length):
            return sorted(int(s) for s in starts)
    raise SlicingError(
        f"could not place {n_slices} slices of {length} days {min_separation} apart in {n_days} days "
        f"after {max_retries} attempts"
    )
