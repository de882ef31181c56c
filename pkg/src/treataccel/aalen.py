"""Additive hazards fit for the treatment intensity, with per-subject
predicted cumulative intensities and martingale residual diagnostics.

The model is linear in the design row with time-varying coefficients; only
the cumulative coefficients are estimated, by separate least squares at each
pooled treatment event time over the subjects then at risk. Design rows are
always evaluated at left limits.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _backend
from ._pack import pack_subjects, sweep_data
from .cohort import (TREATMENT, Cohort, SubjectPath, Term, parse_term,
                     pooled_event_times)
from .stepfun import StepFunction

__all__ = ["DesignSpec", "CumulativeCoefficients", "fit_aalen",
           "predict_cum_intensity", "martingale_residuals",
           "residual_group_means", "ResidualMeans"]

RANK_TOL = 1e-10


@dataclass(frozen=True)
class DesignSpec:
    """Ordered regression terms; the first is the intercept unless the
    parse source disabled it."""

    terms: tuple[Term, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError("design needs at least one term")

    @property
    def p(self) -> int:
        return len(self.terms)

    def labels(self):
        return [t.label() for t in self.terms]

    def validate_against(self, schema):
        declared = schema.declared()
        for t in self.terms:
            if t.kind != "intercept" and t.name not in declared:
                raise KeyError(f"design term references undeclared covariate "
                               f"{t.name!r}")

    @classmethod
    def from_terms(cls, terms) -> "DesignSpec":
        return cls(tuple(terms))

    @classmethod
    def parse(cls, source: str) -> "DesignSpec":
        """One term per line (or semicolon-separated): ``1``, a covariate
        name, or ``name <op> threshold``. ``#`` starts a comment. The
        intercept is prepended automatically unless present or suppressed by
        a ``nointercept`` line. A bare existing file path is read first."""
        if "\n" not in source and os.path.exists(source):
            with open(source, encoding="utf-8") as fh:
                source = fh.read()
        terms = []
        suppress = False
        for chunk in source.replace(";", "\n").splitlines():
            line = chunk.split("#", 1)[0].strip()
            if not line:
                continue
            if line.lower() == "nointercept":
                suppress = True
                continue
            terms.append(parse_term(line))
        if not suppress and not any(t.kind == "intercept" for t in terms):
            terms.insert(0, Term("intercept"))
        return cls(tuple(terms))


@dataclass
class CumulativeCoefficients:
    """Increment vectors of the cumulative coefficients at the pooled
    treatment event times; rank-skipped times carry a zero row."""

    times: np.ndarray
    increments: np.ndarray
    rank_flags: np.ndarray
    terms: tuple[Term, ...]

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.increments = np.asarray(self.increments, dtype=float)
        self.rank_flags = np.asarray(self.rank_flags, dtype=bool)
        K = self.times.size
        if self.increments.shape != (K, len(self.terms)):
            raise ValueError("increment matrix shape does not match times/terms")
        if self.rank_flags.shape != (K,):
            raise ValueError("one rank flag per event time required")
        if K and np.any(self.increments[self.rank_flags] != 0.0):
            raise ValueError("skipped times must have zero increments")

    @property
    def p(self) -> int:
        return len(self.terms)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.increments, axis=0)

    def n_skipped(self) -> int:
        return int(self.rank_flags.sum())


def fit_aalen(cohort: Cohort, design: DesignSpec) -> CumulativeCoefficients:
    """Least-squares increments at every pooled treatment event time.

    Rank-deficient times (including risk sets smaller than the design) yield
    a zero increment and a set flag.
    """
    design.validate_against(cohort.schema)
    ts, _ = pooled_event_times(cohort, TREATMENT)
    if ts.size == 0:
        raise ValueError("no treatment events in the cohort")
    sd = sweep_data(pack_subjects(cohort, design))
    incs, flags = _backend.aalen_sweep(sd)
    return CumulativeCoefficients(sd.ts, incs, flags.astype(bool),
                                  tuple(design.terms))


def _term_columns(subject: SubjectPath, terms, ts: np.ndarray) -> np.ndarray:
    """Left-limit design rows for one subject at the given times, (K, p)."""
    out = np.empty((ts.size, len(terms)))
    cache = {}
    for j, term in enumerate(terms):
        if term.kind == "intercept":
            out[:, j] = 1.0
            continue
        if term.name not in cache:
            changes = subject.covariate_changes(term.name)
            base = subject.baseline.get(term.name, 0.0)
            ctimes = np.asarray([c[0] for c in changes])
            vals = np.asarray([base] + [c[1] for c in changes])
            # value strictly before t: count changes with time < t
            cache[term.name] = vals[np.searchsorted(ctimes, ts, side="left")]
        out[:, j] = term.apply_array(cache[term.name])
    return out


def _risk_slice(coeffs: CumulativeCoefficients, subject: SubjectPath) -> int:
    end = subject.terminal_time
    tt = subject.treatment_time
    if tt is not None:
        end = tt if end is None else min(tt, end)
    if end is None:
        return coeffs.times.size
    return int(np.searchsorted(coeffs.times, end, side="right"))


def _subject_increments(coeffs: CumulativeCoefficients, subject: SubjectPath,
                        design: DesignSpec):
    if design.p != coeffs.p:
        raise ValueError("design does not match the fitted coefficients")
    m = _risk_slice(coeffs, subject)
    ts = coeffs.times[:m]
    rows = _term_columns(subject, design.terms, ts)
    return ts, np.einsum("kp,kp->k", rows, coeffs.increments[:m])


def predict_cum_intensity(coeffs: CumulativeCoefficients,
                          subject: SubjectPath,
                          design: DesignSpec) -> StepFunction:
    """Predicted cumulative treatment intensity for one subject: increments
    at every pooled event time while at risk (zero increments retained, so
    jump times line up across subjects), flat after leaving the risk set.
    Increments may be negative; downstream weighting handles positivity."""
    ts, d_lambda = _subject_increments(coeffs, subject, design)
    return StepFunction.from_increments(ts, d_lambda)


def martingale_residuals(cohort: Cohort, coeffs: CumulativeCoefficients,
                         design: DesignSpec) -> dict:
    """Observed-minus-predicted counting process per subject, as paths."""
    out = {}
    for subject in cohort.subjects:
        ts, d_lambda = _subject_increments(coeffs, subject, design)
        dn = np.zeros(ts.size)
        tt = subject.treatment_time
        if tt is not None and ts.size:
            pos = np.searchsorted(ts, tt)
            if pos < ts.size and ts[pos] == tt:
                dn[pos] = 1.0
        out[subject.subject_id] = StepFunction.from_increments(ts, dn - d_lambda)
    return out


@dataclass
class ResidualMeans:
    """Stratum-wise running means of residual paths on a time grid."""

    times: np.ndarray
    strata: list
    means: np.ndarray          # (times, strata), nan marks an empty cell
    term: Term
    empty_cells: int = 0

    def rows(self):
        for i, t in enumerate(self.times):
            for j, s in enumerate(self.strata):
                yield t, s, self.means[i, j]


def residual_group_means(cohort: Cohort, residuals: dict, strata,
                         times=None) -> ResidualMeans:
    """Average residual paths within strata of a covariate expression.

    Membership is evaluated at each grid time on left-limit values, so
    subjects move between strata when a time-varying covariate crosses the
    expression's threshold.
    """
    term = parse_term(strata) if isinstance(strata, str) else strata
    if times is None:
        all_times = [r.times for r in residuals.values() if r.times.size]
        times = (np.unique(np.concatenate(all_times)) if all_times
                 else np.empty(0))
    times = np.asarray(times, dtype=float)
    if cohort.n == 0 or times.size == 0:
        return ResidualMeans(times, [], np.empty((times.size, 0)), term)

    values = np.empty((cohort.n, times.size))
    resid = np.empty((cohort.n, times.size))
    for i, subject in enumerate(cohort.subjects):
        if term.kind == "intercept":
            values[i] = 1.0
        else:
            values[i] = _term_columns(subject, (term,), times)[:, 0]
        resid[i] = residuals[subject.subject_id](times)
    strata_vals = np.unique(values)
    means = np.full((times.size, strata_vals.size), np.nan)
    empty = 0
    for j, sv in enumerate(strata_vals):
        mask = values == sv
        cnt = mask.sum(axis=0)
        hit = cnt > 0
        empty += int((~hit).sum())
        means[hit, j] = (resid.T * mask.T).sum(axis=1)[hit] / cnt[hit]
    if term.kind == "intercept":
        labels = ["all"]
    else:
        labels = [f"{term.label()}={v:g}" for v in strata_vals]
    return ResidualMeans(times, labels, means, term, empty)
