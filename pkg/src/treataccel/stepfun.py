"""Right-continuous piecewise-constant paths with queryable left limits.

Counting processes, cumulative intensities, likelihood-ratio paths and
cumulative hazards are all step functions; this is the one representation
they share. Values are stored as post-jump levels so that multiplicative
paths (products of factors) survive round-trips exactly.
"""

from __future__ import annotations

import numpy as np

__all__ = ["StepFunction"]


class StepFunction:
    """A cadlag step path: value ``initial`` on [0, t_1), then ``levels[k]``
    on [t_k, t_{k+1}).

    Jump times must be strictly increasing and positive. Queries are
    right-continuous; ``left_limit`` evaluates just before a time point.
    """

    __slots__ = ("times", "levels", "initial")

    def __init__(self, times, levels, initial=0.0):
        times = np.asarray(times, dtype=float)
        levels = np.asarray(levels, dtype=float)
        if times.ndim != 1 or levels.shape != times.shape:
            raise ValueError("times and levels must be 1-d arrays of equal length")
        if times.size:
            if times[0] <= 0.0:
                raise ValueError("jump times must be strictly positive")
            if np.any(np.diff(times) <= 0.0):
                raise ValueError("jump times must be strictly increasing")
        self.times = times
        self.levels = levels
        self.initial = float(initial)

    @classmethod
    def from_increments(cls, times, increments, initial=0.0):
        increments = np.asarray(increments, dtype=float)
        return cls(times, initial + np.cumsum(increments), initial=initial)

    @classmethod
    def from_jumps(cls, jump_times, initial=0.0):
        """Counting-process constructor: unit jump at each time."""
        jump_times = np.asarray(jump_times, dtype=float)
        return cls(jump_times, initial + np.arange(1, jump_times.size + 1, dtype=float),
                   initial=initial)

    @property
    def increments(self):
        if self.times.size == 0:
            return np.empty(0)
        return np.diff(np.concatenate(([self.initial], self.levels)))

    def __call__(self, t):
        """Right-continuous value at ``t`` (scalar or array)."""
        idx = np.searchsorted(self.times, t, side="right")
        return self._at(idx)

    def left_limit(self, t):
        """Value just before ``t``: jumps at ``t`` itself are excluded."""
        idx = np.searchsorted(self.times, t, side="left")
        return self._at(idx)

    def _at(self, idx):
        padded = np.concatenate(([self.initial], self.levels))
        out = padded[idx]
        if np.ndim(idx) == 0:
            return float(out)
        return out

    def n_jumps_upto(self, t):
        """Number of stored jump times in (0, t]."""
        return int(np.searchsorted(self.times, t, side="right"))

    def __eq__(self, other):
        if not isinstance(other, StepFunction):
            return NotImplemented
        return (self.initial == other.initial
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.levels, other.levels))

    def __repr__(self):
        return (f"StepFunction({self.times.size} jumps, initial={self.initial!r}, "
                f"final={self.levels[-1] if self.times.size else self.initial!r})")
