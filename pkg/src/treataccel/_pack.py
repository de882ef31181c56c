"""Packed array views of a cohort for the sweep backends.

Subjects are reduced to flat numpy primitives once (`pack_subjects`), after
which materializing the time-ordered streams a sweep needs — pooled event
times, per-time event lists, globally sorted design-column and rate updates —
is pure array work (`sweep_data`). Bootstrap replicates reuse the packed
subjects and only rebuild the streams for the resampled index vector, so no
per-replicate object construction happens.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .acceleration import AccelerationSpec, evaluate_g
from .cohort import COVARIATE, OUTCOME, Cohort

__all__ = ["SubjectArrays", "SweepData", "pack_subjects", "sweep_data"]


@dataclass
class SubjectArrays:
    """Per-subject primitives in cohort order; ragged parts in CSR form."""

    ids: list
    trt_time: np.ndarray       # nan when never treated
    trt_risk_end: np.ndarray   # min(treatment time, terminal time)
    term_time: np.ndarray
    is_event: np.ndarray       # 1 when the terminal event is the outcome
    X0: np.ndarray             # design rows just after 0
    ch_ptr: np.ndarray         # column updates per subject, time-sorted
    ch_time: np.ndarray
    ch_col: np.ndarray
    ch_val: np.ndarray
    g0: np.ndarray             # rate factor on the first segment
    gch_ptr: np.ndarray        # rate-factor updates per subject
    gch_time: np.ndarray
    gch_val: np.ndarray
    horizon: float
    p: int

    @property
    def n(self) -> int:
        return len(self.ids)


@dataclass
class SweepData:
    """Time-ordered streams for one concrete (possibly resampled) cohort."""

    n: int
    p: int
    trt_risk_end: np.ndarray
    ts: np.ndarray             # pooled treatment event times
    ev_ptr: np.ndarray
    ev_subj: np.ndarray
    term_time: np.ndarray
    is_event: np.ndarray
    os_times: np.ndarray       # pooled outcome event times
    oev_ptr: np.ndarray
    oev_subj: np.ndarray
    X0: np.ndarray
    ch_time: np.ndarray        # globally time-sorted column updates
    ch_subj: np.ndarray
    ch_col: np.ndarray
    ch_val: np.ndarray
    g0: np.ndarray
    gch_time: np.ndarray
    gch_subj: np.ndarray
    gch_val: np.ndarray


def _pool(times: np.ndarray, members: np.ndarray):
    """(sorted distinct times, CSR ptr, CSR member list) for event pooling."""
    if times.size == 0:
        return (np.empty(0), np.zeros(1, dtype=np.int64),
                np.empty(0, dtype=np.int64))
    uniq, inv = np.unique(times, return_inverse=True)
    order = np.argsort(inv, kind="stable")
    ptr = np.zeros(uniq.size + 1, dtype=np.int64)
    np.cumsum(np.bincount(inv, minlength=uniq.size), out=ptr[1:])
    return uniq, ptr, members[order]


def _ragged_take(ptr: np.ndarray, idx: np.ndarray):
    """Flat source positions selecting whole CSR rows, plus new-row lengths."""
    lens = ptr[idx + 1] - ptr[idx]
    total = int(lens.sum())
    if total == 0:
        return np.empty(0, dtype=np.int64), lens
    ends = np.cumsum(lens)
    pos = (np.arange(total, dtype=np.int64)
           - np.repeat(ends - lens, lens) + np.repeat(ptr[idx], lens))
    return pos, lens


def pack_subjects(cohort: Cohort, design,
                  accel: AccelerationSpec | None = None) -> SubjectArrays:
    """Flatten a cohort against a design (and optionally a rate spec).

    Column updates are pre-transformed: a covariate change becomes one update
    per design column that reads the covariate, already passed through the
    term (indicator or raw). The rate factor likewise becomes an initial
    value plus updates at the spec's driving event times, so the sweeps never
    see covariates or specs.
    """
    terms = tuple(design.terms) if hasattr(design, "terms") else tuple(design)
    p = len(terms)
    n = cohort.n
    cols_for = {}
    for j, term in enumerate(terms):
        if term.kind != "intercept":
            cols_for.setdefault(term.name, []).append(j)

    trt_time = np.full(n, np.nan)
    risk_end = np.empty(n)
    term_time = np.empty(n)
    is_event = np.zeros(n, dtype=np.uint8)
    X0 = np.empty((n, p))
    ch_ptr = np.zeros(n + 1, dtype=np.int64)
    ch_time, ch_col, ch_val = [], [], []
    g0 = np.ones(n)
    gch_ptr = np.zeros(n + 1, dtype=np.int64)
    gch_time, gch_val = [], []
    driving = set(accel.driving_processes()) if accel is not None else set()

    for i, subj in enumerate(cohort.subjects):
        tt = subj.treatment_time
        term_t = subj.terminal_time
        if term_t is None:
            raise ValueError(f"subject {subj.subject_id!r} has no terminal event")
        if tt is not None:
            trt_time[i] = tt
        risk_end[i] = term_t if tt is None else min(tt, term_t)
        term_time[i] = term_t
        is_event[i] = 1 if subj.terminal_kind == OUTCOME else 0

        state = dict(subj.baseline)
        for j, term in enumerate(terms):
            X0[i, j] = term.apply(state.get(term.name, 0.0)) \
                if term.kind != "intercept" else 1.0
        for ev in subj.events:
            if ev.kind != COVARIATE:
                continue
            for j in cols_for.get(ev.name, ()):
                ch_time.append(ev.time)
                ch_col.append(j)
                ch_val.append(terms[j].apply(ev.value))
        ch_ptr[i + 1] = len(ch_time)

        if accel is not None:
            d_times = sorted({ev.time for ev in subj.events
                              if ev.kind == COVARIATE and ev.name in driving})
            # left-continuity: the value AT a driving time is the value on
            # the segment ending there, so segment values are read at the
            # next boundary (tail read past the last one)
            bounds = d_times + [(d_times[-1] if d_times else 0.0) + 1.0]
            vals = [evaluate_g(accel, subj, u) for u in bounds]
            g0[i] = vals[0]
            for u, v in zip(d_times, vals[1:]):
                gch_time.append(u)
                gch_val.append(v)
        gch_ptr[i + 1] = len(gch_time)

    return SubjectArrays(
        ids=[s.subject_id for s in cohort.subjects],
        trt_time=trt_time, trt_risk_end=risk_end, term_time=term_time,
        is_event=is_event, X0=X0,
        ch_ptr=ch_ptr, ch_time=np.asarray(ch_time, dtype=float),
        ch_col=np.asarray(ch_col, dtype=np.int64),
        ch_val=np.asarray(ch_val, dtype=float),
        g0=g0, gch_ptr=gch_ptr,
        gch_time=np.asarray(gch_time, dtype=float),
        gch_val=np.asarray(gch_val, dtype=float),
        horizon=cohort.horizon, p=p)


def sweep_data(sa: SubjectArrays, idx: np.ndarray | None = None) -> SweepData:
    """Materialize sweep streams for the full cohort or a resample.

    ``idx`` selects subjects with repetition (bootstrap); positions in the
    output are renumbered 0..len(idx)-1.
    """
    if idx is None:
        idx = np.arange(sa.n, dtype=np.int64)
    idx = np.asarray(idx, dtype=np.int64)
    m = idx.size

    trt_time = sa.trt_time[idx]
    treated = np.flatnonzero(~np.isnan(trt_time))
    ts, ev_ptr, ev_subj = _pool(trt_time[treated], treated)

    term_time = sa.term_time[idx]
    is_event = sa.is_event[idx]
    deaths = np.flatnonzero(is_event != 0)
    os_times, oev_ptr, oev_subj = _pool(term_time[deaths], deaths)

    pos, lens = _ragged_take(sa.ch_ptr, idx)
    ch_subj = np.repeat(np.arange(m, dtype=np.int64), lens)
    ch_time = sa.ch_time[pos]
    order = np.argsort(ch_time, kind="stable")
    gpos, glens = _ragged_take(sa.gch_ptr, idx)
    gch_subj = np.repeat(np.arange(m, dtype=np.int64), glens)
    gch_time = sa.gch_time[gpos]
    gorder = np.argsort(gch_time, kind="stable")

    return SweepData(
        n=m, p=sa.p,
        trt_risk_end=sa.trt_risk_end[idx],
        ts=ts, ev_ptr=ev_ptr, ev_subj=ev_subj,
        term_time=term_time, is_event=is_event,
        os_times=os_times, oev_ptr=oev_ptr, oev_subj=oev_subj,
        X0=sa.X0[idx].copy(),
        ch_time=ch_time[order], ch_subj=ch_subj[order],
        ch_col=sa.ch_col[pos][order], ch_val=sa.ch_val[pos][order],
        g0=sa.g0[idx].copy(),
        gch_time=gch_time[gorder], gch_subj=gch_subj[gorder],
        gch_val=sa.gch_val[gpos][gorder])
