"""Random time changes for treatment processes.

The time map solves dGamma(t) = rate(Gamma(t)) dt for a strictly positive,
piecewise-constant rate driven by a subject's event indicators, so it is
piecewise linear and solved exactly by walking segments: within a segment of
constant slope, the hypothetical time of the next driving event is available
in closed form. The map composes a treatment path with a faster or slower
clock; its exact inverse maps observational jump times back to hypothetical
ones.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .acceleration import AccelerationSpec, evaluate_g
from .cohort import COVARIATE, SubjectPath
from .stepfun import StepFunction

__all__ = ["TimeChange", "gamma_from_rate", "gamma_inverse", "shift_path",
           "mc_check_intensity", "IntensityCheck"]

_MAX_SEGMENTS = 100_000


class TimeChange:
    """Strictly increasing piecewise-linear map with Gamma(0) = 0.

    ``knot_t`` are hypothetical times (starting at 0), ``knot_g`` the mapped
    observational times, and ``slopes[i]`` the rate on segment i; the final
    slope extends beyond the last knot.
    """

    __slots__ = ("knot_t", "knot_g", "slopes")

    def __init__(self, knot_t, knot_g, slopes):
        knot_t = np.asarray(knot_t, dtype=float)
        knot_g = np.asarray(knot_g, dtype=float)
        slopes = np.asarray(slopes, dtype=float)
        if knot_t.size == 0 or knot_t[0] != 0.0 or knot_g[0] != 0.0:
            raise ValueError("time change must start at (0, 0)")
        if slopes.size != knot_t.size:
            raise ValueError("need one slope per knot (last slope extends to infinity)")
        if np.any(slopes <= 0.0):
            raise ValueError("nonpositive rate")
        if np.any(np.diff(knot_t) <= 0.0) or np.any(np.diff(knot_g) <= 0.0):
            raise ValueError("knots must be strictly increasing")
        self.knot_t = knot_t
        self.knot_g = knot_g
        self.slopes = slopes

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.clip(np.searchsorted(self.knot_t, t, side="right") - 1, 0, None)
        out = self.knot_g[idx] + self.slopes[idx] * (t - self.knot_t[idx])
        return float(out) if out.ndim == 0 else out

    def inverse(self) -> "TimeChange":
        return TimeChange(self.knot_g, self.knot_t, 1.0 / self.slopes)

    def __repr__(self):
        return f"TimeChange({self.knot_t.size} knots, slopes={self.slopes!r})"


def _driving_times(spec: AccelerationSpec, subject: SubjectPath):
    procs = set(spec.driving_processes())
    times = sorted({ev.time for ev in subject.events
                    if ev.kind == COVARIATE and ev.name in procs})
    return times


def gamma_from_rate(spec: AccelerationSpec, subject: SubjectPath) -> TimeChange:
    """Exact piecewise-linear solution of the time-change equation.

    The rate on each segment is the factor evaluated at the segment's
    left-limit state; segment boundaries sit where a driving process of the
    spec changes, translated onto the hypothetical clock.
    """
    knot_t = [0.0]
    knot_g = [0.0]
    slopes = []
    t = 0.0
    g_obs = 0.0
    for s in _driving_times(spec, subject):
        if s <= g_obs:
            continue
        if len(slopes) > _MAX_SEGMENTS:
            raise ValueError("rate has too many change points on a finite horizon")
        c = evaluate_g(spec, subject, s)  # left-continuous: value on (g_obs, s]
        if c <= 0:
            raise ValueError("nonpositive rate")
        t += (s - g_obs) / c
        g_obs = s
        knot_t.append(t)
        knot_g.append(g_obs)
        slopes.append(c)
    tail = evaluate_g(spec, subject, g_obs + 1.0)
    if tail <= 0:
        raise ValueError("nonpositive rate")
    slopes.append(tail)
    return TimeChange(knot_t, knot_g, slopes)


def gamma_inverse(gamma: TimeChange) -> TimeChange:
    """Exact inverse; composing with the input is the identity map."""
    return gamma.inverse()


def shift_path(path: StepFunction, gamma: TimeChange) -> StepFunction:
    """Compose a path with the time change: a jump at observational time s
    appears at the hypothetical time mapping to s."""
    inv = gamma.inverse()
    return StepFunction(inv(path.times), path.levels, initial=path.initial)


@dataclass
class IntensityCheck:
    """Monte-Carlo comparison of the mean accelerated count against the
    time-change prediction."""

    lam: float
    horizon: float
    n_paths: int
    seed: int
    empirical_mean: float
    predicted: float
    std_error: float
    scenario: str
    counts: np.ndarray = field(repr=False)

    @property
    def z(self) -> float:
        if self.std_error == 0.0:
            return 0.0 if self.empirical_mean == self.predicted else float("inf")
        return (self.empirical_mean - self.predicted) / self.std_error

    @property
    def ok(self) -> bool:
        return abs(self.z) <= 4.0

    def row(self):
        return {
            "lambda": self.lam, "horizon": self.horizon, "paths": self.n_paths,
            "seed": self.seed, "scenario": self.scenario,
            "empirical_mean": self.empirical_mean, "predicted": self.predicted,
            "std_error": self.std_error, "z": self.z, "ok": int(self.ok),
        }


def mc_check_intensity(lam: float, spec: AccelerationSpec, horizon: float,
                       n_paths: int, seed: int,
                       subject: SubjectPath | None = None) -> IntensityCheck:
    """Simulate homogeneous counting paths, accelerate them, and compare the
    empirical mean count on [0, horizon] with the analytic prediction.

    With a constant intensity ``lam`` the predicted mean is lam * Gamma(horizon),
    the compensator of the accelerated process. Deviations beyond 4 standard
    errors flag the check as failed.
    """
    if lam <= 0 or horizon <= 0:
        raise ValueError("lam and horizon must be positive")
    if n_paths < 100:
        raise ValueError("need at least 100 paths")
    if subject is None:
        subject = SubjectPath("reference", {}, [])
    gamma = gamma_from_rate(spec, subject)
    t_obs = gamma(horizon)
    predicted = lam * t_obs

    counts = np.empty(n_paths, dtype=np.int64)
    chunk = max(8, int(4 * predicted) + 16)
    for i in range(n_paths):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(
            entropy=seed, spawn_key=(i,))))
        arrivals = []
        t = 0.0
        while True:
            gaps = rng.exponential(1.0 / lam, size=chunk)
            cum = t + np.cumsum(gaps)
            inside = cum[cum <= t_obs]
            arrivals.append(inside)
            if inside.size < chunk:
                break
            t = cum[-1]
        jumps = np.concatenate(arrivals)
        path = StepFunction.from_jumps(jumps)
        shifted = shift_path(path, gamma)
        counts[i] = shifted.n_jumps_upto(horizon)
    mean = float(np.mean(counts))
    se = float(np.std(counts, ddof=1) / np.sqrt(n_paths))
    return IntensityCheck(lam, horizon, n_paths, seed, mean, predicted, se,
                          spec.describe(), counts)
