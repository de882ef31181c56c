"""Weighted cumulative-hazard and survival estimation under treatment
acceleration, with subject-level bootstrap bands.

The cumulative hazard weights each outcome event and each at-risk subject by
the left limit of its likelihood ratio; survival is the product-limit
transform. With the identity rate spec all ratios are exactly one and the
result collapses to the unweighted Kaplan-Meier estimator.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._pack import SubjectArrays, pack_subjects, sweep_data
from ._purepy import ZeroDenominator
from .acceleration import AccelerationSpec
from .aalen import DesignSpec
from .cohort import OUTCOME, Cohort, pooled_event_times
from .stepfun import StepFunction
from .weights import DEFAULT_FLOOR

__all__ = ["CumulativeHazard", "SurvivalCurve", "weighted_nelson_aalen",
           "survival_from_cumhaz", "estimate_survival", "bootstrap_ci",
           "ratio_matrix", "ZeroDenominator"]


@dataclass
class CumulativeHazard:
    """Weighted event-rate increments at the pooled outcome event times."""

    times: np.ndarray
    increments: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.increments = np.asarray(self.increments, dtype=float)
        if self.times.shape != self.increments.shape:
            raise ValueError("one increment per event time required")
        if np.any(self.increments < 0.0):
            raise ValueError("negative hazard increment")

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments)

    def __call__(self, t):
        step = StepFunction.from_increments(self.times, self.increments)
        return step(t)


@dataclass
class SurvivalCurve:
    grid: np.ndarray
    estimate: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    scenario_label: str = ""

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.estimate = np.asarray(self.estimate, dtype=float)
        if self.grid.shape != self.estimate.shape:
            raise ValueError("grid/estimate length mismatch")
        if np.any((self.estimate < 0.0) | (self.estimate > 1.0)):
            raise ValueError("survival estimates must lie in [0, 1]")
        if np.any(np.diff(self.estimate) > 0.0):
            raise ValueError("survival estimate must be non-increasing")
        for band in (self.lower, self.upper):
            if band is not None and np.asarray(band).shape != self.grid.shape:
                raise ValueError("band length mismatch")
        if self.lower is not None and self.upper is not None:
            low = np.asarray(self.lower, dtype=float)
            up = np.asarray(self.upper, dtype=float)
            if np.any(low > self.estimate) or np.any(self.estimate > up):
                raise ValueError("band must bracket the estimate")

    @property
    def has_band(self) -> bool:
        return self.lower is not None and self.upper is not None


def weighted_nelson_aalen(cohort: Cohort, weights: dict) -> CumulativeHazard:
    """Ratio-weighted event-rate increments at pooled outcome times.

    Numerator and denominator both use weight left limits, so a treatment
    factor at the same instant as an outcome does not contribute. An empty
    weighted risk set at an event time is fatal.
    """
    os_times, _ = pooled_event_times(cohort, OUTCOME)
    if os_times.size == 0:
        return CumulativeHazard(os_times, np.zeros(0))
    term_time = np.array([s.terminal_time for s in cohort.subjects])
    is_event = np.array([s.terminal_kind == OUTCOME for s in cohort.subjects])
    W = np.empty((cohort.n, os_times.size))
    for i, subj in enumerate(cohort.subjects):
        W[i] = weights[subj.subject_id].at_left(os_times)
    at_risk = term_time[:, None] >= os_times[None, :]
    den = (W * at_risk).sum(axis=0)
    if np.any(den <= 0.0):
        raise ZeroDenominator(os_times[np.argmax(den <= 0.0)])
    ev = is_event[:, None] & (term_time[:, None] == os_times[None, :])
    num = (W * ev).sum(axis=0)
    return CumulativeHazard(os_times, num / den)


def survival_from_cumhaz(haz: CumulativeHazard) -> SurvivalCurve:
    """Product-limit transform; an increment above one is fatal since it
    would push survival negative."""
    if np.any(haz.increments > 1.0):
        t = haz.times[np.argmax(haz.increments > 1.0)]
        raise ValueError(f"hazard increment above 1 at time {t:g}")
    return SurvivalCurve(haz.times, np.cumprod(1.0 - haz.increments))


def _survival_step(times: np.ndarray, increments: np.ndarray) -> StepFunction:
    return StepFunction(times, np.cumprod(1.0 - increments), initial=1.0)


def _km_increments(sd) -> np.ndarray:
    """Unweighted increments: events over at-risk count per outcome time.

    Bitwise-equal to the weighted sweep with all ratios exactly one (integer
    counts are exact in double precision).
    """
    order = np.sort(sd.term_time)
    at_risk = sd.n - np.searchsorted(order, sd.os_times, side="left")
    deaths = np.diff(sd.oev_ptr)
    return deaths.astype(float) / at_risk.astype(float)


def _pipeline_increments(sd, identity: bool, floor: float,
                         rank_tol: float | None = None):
    """Fit + weight + hazard sweep on packed streams; returns the outcome-
    time increments. The identity spec skips the fit and weight sweeps: the
    result is bitwise identical and the no-treatment-events precondition is
    still enforced."""
    if sd.ts.size == 0:
        raise ValueError("no treatment events in the cohort")
    if identity:
        return _km_increments(sd)
    incs, _flags = _backend.aalen_sweep(sd)
    na_inc, _probe, _hits, _neg = _backend.weight_na_sweep(
        sd, incs, floor, np.empty(0))
    return na_inc


def _check_grid(grid, horizon: float) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("empty evaluation grid")
    if np.any(np.diff(grid) < 0.0):
        raise ValueError("grid times must be non-decreasing")
    if grid[0] < 0.0 or grid[-1] > horizon:
        raise ValueError(f"grid must lie within [0, {horizon:g}]")
    return grid


def estimate_survival(cohort: Cohort, design: DesignSpec,
                      accel: AccelerationSpec, grid,
                      floor: float = DEFAULT_FLOOR) -> SurvivalCurve:
    """Full pipeline: fit the treatment model, run the ratio weights, build
    the weighted hazard, transform to survival, evaluate on the grid."""
    grid = _check_grid(grid, cohort.horizon)
    design.validate_against(cohort.schema)
    sa = pack_subjects(cohort, design, accel)
    sd = sweep_data(sa)
    na_inc = _pipeline_increments(sd, accel.is_identity(), floor)
    step = _survival_step(sd.os_times, na_inc)
    return SurvivalCurve(grid, step(grid), scenario_label=accel.describe())


def ratio_matrix(cohort: Cohort, design: DesignSpec, accel: AccelerationSpec,
                 probe_times=None, floor: float = DEFAULT_FLOOR):
    """Likelihood-ratio values for every subject at the probe times.

    Defaults to the pooled treatment event times; values at a jump time are
    post-jump. Returns (times, subject_ids, matrix) with one row per probe
    time and one column per subject in cohort order.
    """
    design.validate_against(cohort.schema)
    sd = sweep_data(pack_subjects(cohort, design, accel))
    if sd.ts.size == 0:
        raise ValueError("no treatment events in the cohort")
    probes = sd.ts.copy() if probe_times is None \
        else np.asarray(probe_times, dtype=float)
    if np.any(np.diff(probes) < 0.0):
        raise ValueError("probe times must be non-decreasing")
    ids = [s.subject_id for s in cohort.subjects]
    if accel.is_identity():
        return probes, ids, np.ones((probes.size, sd.n))
    incs, _flags = _backend.aalen_sweep(sd)
    _na, probe, _hits, _neg = _backend.weight_na_sweep(sd, incs, floor, probes)
    return probes, ids, probe


def bootstrap_ci(cohort: Cohort, design: DesignSpec, accel: AccelerationSpec,
                 grid, reps: int, level: float = 0.95, seed: int = 0,
                 floor: float = DEFAULT_FLOOR, threads: int | None = None,
                 max_drop_fraction: float = 0.10) -> SurvivalCurve:
    """Point estimate plus pointwise percentile band from subject-level
    resampling.

    Every replicate draws n subjects with replacement using a seed derived
    from (seed, replicate index), re-runs the pipeline, and is evaluated on
    the grid; failed replicates (no treatment events in the resample) are
    dropped, fatally so beyond ``max_drop_fraction``.
    """
    if reps < 2:
        raise ValueError("need at least 2 bootstrap replicates")
    if not 0.0 < level < 1.0:
        raise ValueError("level must lie in (0, 1)")
    grid = _check_grid(grid, cohort.horizon)
    design.validate_against(cohort.schema)
    sa = pack_subjects(cohort, design, accel)
    identity = accel.is_identity()
    sd = sweep_data(sa)
    na_inc = _pipeline_increments(sd, identity, floor)
    point = _survival_step(sd.os_times, na_inc)(grid)

    n = sa.n

    def one_rep(rep: int):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(rep,))
        idx = np.random.Generator(np.random.PCG64(ss)).integers(0, n, size=n)
        rd = sweep_data(sa, idx)
        try:
            inc = _pipeline_increments(rd, identity, floor)
        except (ValueError, ZeroDenominator):
            return None
        return _survival_step(rd.os_times, inc)(grid)

    if threads is not None and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(one_rep, range(reps)))
    else:
        curves = [one_rep(rep) for rep in range(reps)]
    kept = [c for c in curves if c is not None]
    dropped = reps - len(kept)
    if dropped > max_drop_fraction * reps:
        raise RuntimeError(f"{dropped} of {reps} bootstrap replicates failed")
    stack = np.vstack(kept)
    alpha = (1.0 - level) / 2.0
    lower = np.quantile(stack, alpha, axis=0)
    upper = np.quantile(stack, 1.0 - alpha, axis=0)
    lower = np.minimum(lower, point)
    upper = np.maximum(upper, point)
    return SurvivalCurve(grid, point, lower=lower, upper=upper,
                         scenario_label=accel.describe())
