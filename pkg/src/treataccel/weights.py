"""Subject-level likelihood-ratio weights.

The ratio process solves a jump integral equation driven by the treatment
martingale; its pathwise product solution multiplies one factor per pooled
treatment event time. With the rate spec identically one every factor is
exactly 1.0, so the path collapses to the constant 1 bitwise, whatever the
fitted model says.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acceleration import AccelerationSpec, evaluate_g
from .cohort import SubjectPath
from .stepfun import StepFunction

__all__ = ["LikelihoodRatioPath", "likelihood_ratio_path",
           "weight_diagnostics", "WeightSummary", "DEFAULT_FLOOR"]

DEFAULT_FLOOR = 1e-6


@dataclass
class LikelihoodRatioPath:
    """Piecewise-constant ratio path starting at 1, changing only at pooled
    treatment event times; stored values are post-jump and never below the
    floor used to build them."""

    path: StepFunction
    floor_hits: int = 0
    subject_id: str | None = None

    def __call__(self, t):
        return self.path(t)

    def at_left(self, t):
        return self.path.left_limit(t)

    @property
    def times(self):
        return self.path.times


def likelihood_ratio_path(subject: SubjectPath, cum_intensity: StepFunction,
                          spec: AccelerationSpec,
                          floor: float = DEFAULT_FLOOR) -> LikelihoodRatioPath:
    """Run the product solution along one subject's predicted intensity.

    ``cum_intensity`` must carry an increment slot for every pooled
    treatment event time the subject was at risk for (zero increments
    included), as the prediction op emits. Each step multiplies by
    1 + (g(t_k) - 1)(dN(t_k) - dLambda(t_k)); results below ``floor`` are
    truncated there and counted.
    """
    if floor <= 0:
        raise ValueError("floor must be positive")
    ts = cum_intensity.times
    d_lambda = cum_intensity.increments
    tt = subject.treatment_time
    r = 1.0
    hits = 0
    values = np.empty(ts.size)
    for k in range(ts.size):
        t = ts[k]
        g = evaluate_g(spec, subject, t)
        dn = 1.0 if (tt is not None and t == tt) else 0.0
        r = r * (1.0 + (g - 1.0) * (dn - d_lambda[k]))
        if r < floor:
            r = floor
            hits += 1
        values[k] = r
    return LikelihoodRatioPath(StepFunction(ts, values, initial=1.0),
                               floor_hits=hits,
                               subject_id=subject.subject_id)


@dataclass
class WeightSummary:
    mean: float
    max: float
    min: float
    floor_hit_count: int
    n: int


def weight_diagnostics(paths, t: float) -> WeightSummary:
    """Cross-subject summary of the ratio values at one time; a mean far
    from 1 signals treatment-model misspecification or extreme rates."""
    paths = list(paths)
    if not paths:
        raise ValueError("no weight paths supplied")
    vals = np.array([p(t) for p in paths])
    return WeightSummary(mean=float(vals.mean()), max=float(vals.max()),
                         min=float(vals.min()),
                         floor_hit_count=int(sum(p.floor_hits for p in paths)),
                         n=len(paths))
