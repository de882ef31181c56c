"""Longitudinal counting-process cohorts.

A subject is a vector of baseline covariates plus a time-ordered event
stream: at most one treatment event, at most one terminal event (outcome or
censoring, mutually exclusive), and any number of covariate-change events.
Time-varying covariates are carried as last-observation-carried-forward step
paths and always evaluated at left limits.
"""

from __future__ import annotations

import csv
import io
import json
import os
from bisect import bisect_left
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "TREATMENT", "OUTCOME", "CENSOR", "COVARIATE",
    "Event", "SubjectPath", "CovariateSchema", "Cohort",
    "ParseError", "Term", "parse_term",
    "parse_cohort", "write_cohort", "read_cohort",
    "at_risk", "covariate_row", "pooled_event_times",
]

TREATMENT = "treatment"
OUTCOME = "outcome"
CENSOR = "censor"
COVARIATE = "covariate_change"

_CSV_KIND = {TREATMENT: "treat", OUTCOME: "outcome", CENSOR: "censor", COVARIATE: "cov"}
_KIND_FROM_CSV = {v: k for k, v in _CSV_KIND.items()}


class ParseError(ValueError):
    """Malformed cohort input; message names the subject and line."""


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    name: str | None = None     # covariate name, or optional outcome sub-label
    value: float | None = None  # new covariate value (kind == COVARIATE only)


@dataclass
class SubjectPath:
    """One subject: baseline covariates plus an ordered event stream."""

    subject_id: str
    baseline: dict[str, float]
    events: list[Event] = field(default_factory=list)

    def __post_init__(self):
        self.validate()

    def validate(self):
        last = 0.0
        terminal_seen = False
        counts = {TREATMENT: 0, OUTCOME: 0, CENSOR: 0}
        for ev in self.events:
            if ev.time <= 0.0:
                raise ParseError(f"subject {self.subject_id}: negative or zero event time {ev.time}")
            if ev.time < last:
                raise ParseError(f"subject {self.subject_id}: event times not non-decreasing at {ev.time}")
            if terminal_seen and ev.time > self.terminal_time:
                raise ParseError(f"subject {self.subject_id}: event after terminal event")
            if ev.kind in counts:
                counts[ev.kind] += 1
            elif ev.kind != COVARIATE:
                raise ParseError(f"subject {self.subject_id}: unknown event kind {ev.kind!r}")
            if ev.kind == COVARIATE and ev.name is None:
                raise ParseError(f"subject {self.subject_id}: covariate event without a name")
            if ev.kind in (OUTCOME, CENSOR):
                terminal_seen = True
            last = ev.time
        for kind in (TREATMENT, OUTCOME, CENSOR):
            if counts[kind] > 1:
                raise ParseError(f"subject {self.subject_id}: more than one {kind} event")
        if counts[OUTCOME] and counts[CENSOR]:
            raise ParseError(f"subject {self.subject_id}: outcome and censor are mutually exclusive")
        term = self.terminal_time
        if term is not None:
            for ev in self.events:
                if ev.kind == COVARIATE and ev.time > term:
                    raise ParseError(f"subject {self.subject_id}: covariate change after terminal event")

    def _first_time(self, kind):
        for ev in self.events:
            if ev.kind == kind:
                return ev.time
        return None

    @property
    def treatment_time(self) -> float | None:
        return self._first_time(TREATMENT)

    @property
    def terminal_time(self) -> float | None:
        for ev in self.events:
            if ev.kind in (OUTCOME, CENSOR):
                return ev.time
        return None

    @property
    def terminal_kind(self) -> str | None:
        for ev in self.events:
            if ev.kind in (OUTCOME, CENSOR):
                return ev.kind
        return None

    def covariate_changes(self, name):
        """(time, value) pairs for one covariate, in time order."""
        return [(ev.time, ev.value) for ev in self.events
                if ev.kind == COVARIATE and ev.name == name]

    def covariate_left(self, name, t):
        """Covariate value just before ``t`` (baseline value if no prior change)."""
        val = self.baseline.get(name, 0.0)
        for ev in self.events:
            if ev.time >= t:
                break
            if ev.kind == COVARIATE and ev.name == name:
                val = ev.value
        return val


@dataclass(frozen=True)
class CovariateSchema:
    """Declared covariate names: baseline columns and time-varying processes.

    A name may appear in both lists; the baseline column then supplies the
    process's initial value (doubling as value 0 when absent).
    """

    baseline: tuple[str, ...]
    time_varying: tuple[str, ...] = ()

    def declared(self):
        return set(self.baseline) | set(self.time_varying)


@dataclass
class Cohort:
    subjects: list[SubjectPath]
    horizon: float
    schema: CovariateSchema

    def __post_init__(self):
        seen = set()
        for s in self.subjects:
            if s.subject_id in seen:
                raise ParseError(f"duplicate subject_id {s.subject_id!r}")
            seen.add(s.subject_id)
            if s.events and s.events[-1].time > self.horizon:
                raise ParseError(
                    f"subject {s.subject_id}: event at {s.events[-1].time} beyond horizon {self.horizon}")

    @property
    def n(self):
        return len(self.subjects)

    def subject(self, subject_id):
        for s in self.subjects:
            if s.subject_id == subject_id:
                return s
        raise KeyError(subject_id)

    def summary(self):
        """Event counts by kind, with terminal sub-label breakdown."""
        counts = {"n": self.n, TREATMENT: 0, OUTCOME: 0, CENSOR: 0}
        sublabels: dict[str, int] = {}
        for s in self.subjects:
            for ev in s.events:
                if ev.kind in (TREATMENT, OUTCOME, CENSOR):
                    counts[ev.kind] += 1
                    if ev.kind == OUTCOME and ev.name:
                        sublabels[ev.name] = sublabels.get(ev.name, 0) + 1
        counts["outcome_sublabels"] = sublabels
        return counts


# -- at-risk logic and covariate evaluation ---------------------------------

def at_risk(subject: SubjectPath, target: str, t: float) -> bool:
    """At-risk indicator, left-continuous: a subject is still at risk AT its
    own jump time.

    For the treatment target the subject leaves the risk set after
    min(treatment time, terminal time); for the outcome target only the
    terminal event removes it (treated subjects stay at risk).
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if target == TREATMENT:
        bound = np.inf
        tt = subject.treatment_time
        if tt is not None:
            bound = tt
        term = subject.terminal_time
        if term is not None:
            bound = min(bound, term)
        return t <= bound
    if target == OUTCOME:
        term = subject.terminal_time
        return term is None or t <= term
    raise ValueError(f"unknown at-risk target {target!r}")


# -- covariate / design term expressions ------------------------------------

_OPS = {
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "!=": lambda a, b: a != b,
    "==": lambda a, b: a == b,
}


@dataclass(frozen=True)
class Term:
    """One design-row entry: the intercept, a raw covariate, or a threshold
    indicator of a covariate. Always evaluated on left-limit values."""

    kind: str                 # "intercept" | "raw" | "indicator"
    name: str | None = None
    op: str | None = None
    threshold: float | None = None

    def label(self):
        if self.kind == "intercept":
            return "1"
        if self.kind == "raw":
            return self.name
        return f"{self.name} {self.op} {_fmt_num(self.threshold)}"

    def apply(self, value: float) -> float:
        if self.kind == "intercept":
            return 1.0
        if self.kind == "raw":
            return float(value)
        return 1.0 if _OPS[self.op](value, self.threshold) else 0.0

    def apply_array(self, values):
        if self.kind == "intercept":
            return np.ones_like(values, dtype=float)
        if self.kind == "raw":
            return np.asarray(values, dtype=float)
        return _OPS[self.op](np.asarray(values, dtype=float), self.threshold).astype(float)


def _fmt_num(x):
    return f"{x:g}"


def parse_term(text: str) -> Term:
    """Parse ``1``, ``name`` or ``name <op> threshold`` (ops: > >= < <= != ==)."""
    s = text.strip()
    if s == "1":
        return Term("intercept")
    for op in ("<=", ">=", "!=", "==", "<", ">"):
        if op in s:
            name, _, rhs = s.partition(op)
            name, rhs = name.strip(), rhs.strip()
            if not name or not rhs:
                raise ValueError(f"malformed term {text!r}")
            return Term("indicator", name=name, op=op, threshold=float(rhs))
    if not s or any(c.isspace() for c in s):
        raise ValueError(f"malformed term {text!r}")
    return Term("raw", name=s)


def covariate_row(subject: SubjectPath, design, t: float, schema: CovariateSchema | None = None):
    """The design row L(t-): each term evaluated on the covariate values just
    before ``t``. Baseline covariates are constant; time-varying ones are
    carried forward from the last change strictly before ``t``."""
    if t <= 0:
        raise ValueError("covariate rows are defined for t > 0 (left limits)")
    terms = getattr(design, "terms", design)
    out = np.empty(len(terms))
    for j, term in enumerate(terms):
        if term.kind == "intercept":
            out[j] = 1.0
            continue
        if schema is not None and term.name not in schema.declared():
            raise KeyError(f"undeclared covariate {term.name!r}")
        if schema is None and term.name not in subject.baseline and not any(
                ev.kind == COVARIATE and ev.name == term.name for ev in subject.events):
            raise KeyError(f"undeclared covariate {term.name!r}")
        out[j] = term.apply(subject.covariate_left(term.name, t))
    return out


def pooled_event_times(cohort: Cohort, kind: str, name: str | None = None):
    """Distinct times with any event of the given kind, with tie multiplicity.

    Returns (times, multiplicities), both ascending-time arrays.
    """
    raw = []
    for s in cohort.subjects:
        for ev in s.events:
            if ev.kind == kind and (name is None or ev.name == name):
                raw.append(ev.time)
    if not raw:
        return np.empty(0), np.empty(0, dtype=np.int64)
    times, mult = np.unique(np.asarray(raw, dtype=float), return_counts=True)
    return times, mult


# -- CSV ingestion ----------------------------------------------------------

def parse_cohort(baseline_source, events_source, schema: CovariateSchema,
                 horizon: float | None = None) -> Cohort:
    """Build a validated Cohort from the two CSV sources.

    ``baseline_source`` / ``events_source`` may be file paths, file objects or
    CSV text. Errors name the offending subject and line number.
    """
    brows, _ = _read_csv(baseline_source)
    erows, _ = _read_csv(events_source)
    if not brows:
        raise ParseError("baseline file has no data rows")
    header = brows[0]
    if header[:1] != ["subject_id"]:
        raise ParseError("baseline header must start with 'subject_id'")
    covnames = header[1:]
    for nm in covnames:
        if nm not in schema.declared():
            raise ParseError(f"unknown covariate name {nm!r} in baseline header")

    baselines: dict[str, dict[str, float]] = {}
    order: list[str] = []
    for lineno, row in enumerate(brows[1:], start=2):
        if not row:
            continue
        sid = row[0]
        if sid in baselines:
            raise ParseError(f"duplicate subject_id {sid!r} (baseline line {lineno})")
        try:
            baselines[sid] = {nm: float(v) for nm, v in zip(covnames, row[1:])}
        except ValueError as exc:
            raise ParseError(f"subject {sid}: bad baseline value (line {lineno}): {exc}") from None
        order.append(sid)

    events: dict[str, list[Event]] = {sid: [] for sid in order}
    eheader = erows[0] if erows else []
    if eheader != ["subject_id", "time", "kind", "name", "value"]:
        raise ParseError("events header must be 'subject_id,time,kind,name,value'")
    for lineno, row in enumerate(erows[1:], start=2):
        if not row:
            continue
        sid, t_s, kind_s, name_s, value_s = (row + [""] * 5)[:5]
        if sid not in events:
            raise ParseError(f"subject {sid}: events row without baseline row (line {lineno})")
        try:
            t = float(t_s)
        except ValueError:
            raise ParseError(f"subject {sid}: bad time {t_s!r} (line {lineno})") from None
        if t < 0:
            raise ParseError(f"subject {sid}: negative time {t_s} (line {lineno})")
        if kind_s not in _KIND_FROM_CSV:
            raise ParseError(f"subject {sid}: unknown kind {kind_s!r} (line {lineno})")
        kind = _KIND_FROM_CSV[kind_s]
        name = name_s or None
        value = None
        if kind == COVARIATE:
            if not name:
                raise ParseError(f"subject {sid}: cov row without name (line {lineno})")
            if name not in schema.declared():
                raise ParseError(f"subject {sid}: unknown covariate name {name!r} (line {lineno})")
            try:
                value = float(value_s)
            except ValueError:
                raise ParseError(f"subject {sid}: bad value {value_s!r} (line {lineno})") from None
        events[sid].append(Event(t, kind, name, value))

    subjects = []
    for sid in order:
        evs = sorted(events[sid], key=lambda e: (e.time, _event_rank(e)))
        try:
            subjects.append(SubjectPath(sid, baselines[sid], evs))
        except ParseError:
            raise
    if horizon is None:
        horizon = max((s.events[-1].time for s in subjects if s.events), default=0.0)
    return Cohort(subjects, float(horizon), schema)


def _event_rank(ev: Event) -> int:
    # covariate changes sort before jumps at a tied time; terminal events last
    return {COVARIATE: 0, TREATMENT: 1, OUTCOME: 2, CENSOR: 2}[ev.kind]


def _read_csv(source):
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and ("\n" in source or "," in source) and not os.path.exists(source):
        text = source
    else:
        with open(source, newline="") as fh:
            text = fh.read()
    rows = [row for row in csv.reader(io.StringIO(text))]
    return rows, text


# -- serialization ----------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def write_cohort(cohort: Cohort, prefix: str):
    """Write ``<prefix>_baseline.csv``, ``<prefix>_events.csv`` and
    ``<prefix>_meta.json``. Floats use repr so a re-parse is bitwise exact."""
    covnames = list(cohort.schema.baseline)
    with open(prefix + "_baseline.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id"] + covnames)
        for s in cohort.subjects:
            w.writerow([s.subject_id] + [_fmt(s.baseline.get(nm, 0.0)) for nm in covnames])
    with open(prefix + "_events.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id", "time", "kind", "name", "value"])
        for s in cohort.subjects:
            for ev in s.events:
                w.writerow([s.subject_id, _fmt(ev.time), _CSV_KIND[ev.kind],
                            ev.name or "", "" if ev.value is None else _fmt(ev.value)])
    with open(prefix + "_meta.json", "w") as fh:
        json.dump({"horizon": cohort.horizon,
                   "baseline": list(cohort.schema.baseline),
                   "time_varying": list(cohort.schema.time_varying)}, fh, indent=1)
        fh.write("\n")


def read_cohort(prefix: str) -> Cohort:
    """Read a cohort written by write_cohort. Without the meta sidecar the
    schema is inferred from the headers and the horizon from the last event."""
    meta_path = prefix + "_meta.json"
    horizon = None
    if os.path.exists(meta_path):
        with open(meta_path) as fh:
            meta = json.load(fh)
        schema = CovariateSchema(tuple(meta["baseline"]), tuple(meta["time_varying"]))
        horizon = meta["horizon"]
    else:
        with open(prefix + "_baseline.csv", newline="") as fh:
            header = next(csv.reader(fh))
        tv = set()
        with open(prefix + "_events.csv", newline="") as fh:
            r = csv.reader(fh)
            next(r)
            for row in r:
                if len(row) >= 4 and row[2] == "cov":
                    tv.add(row[3])
        schema = CovariateSchema(tuple(header[1:]), tuple(sorted(tv)))
    return parse_cohort(prefix + "_baseline.csv", prefix + "_events.csv", schema, horizon)
