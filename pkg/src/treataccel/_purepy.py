"""Numpy reference backend for the event-time sweeps.

Semantics shared with the compiled backend:
  * covariate-column and rate-factor updates take effect strictly after
    their own timestamp (all evaluation uses left limits);
  * at a shared timestamp, outcome contributions are collected before the
    treatment factor is applied, and probes read the post-factor value;
  * at-risk indicators are left-continuous (a subject is at risk at its own
    event time).
"""

from __future__ import annotations

import math

import numpy as np
import scipy.linalg

from ._pack import SweepData

RANK_TOL = 1e-10


class ZeroDenominator(RuntimeError):
    def __init__(self, time):
        super().__init__(f"empty weighted risk set at outcome time {time:g}")
        self.time = time


def aalen_sweep(sd: SweepData, rank_tol: float = RANK_TOL):
    """Per pooled treatment time least squares of the event indicator on the
    left-limit design rows over the at-risk set.

    Returns (increments, rank_flags); a flagged time has a zero increment row.
    Rank is judged on the pivoted triangular factor: the design is deficient
    when the smallest diagonal falls below rank_tol times the largest.
    """
    K = sd.ts.size
    incs = np.zeros((K, sd.p))
    flags = np.zeros(K, dtype=np.uint8)
    X = sd.X0.copy()
    ci = 0
    n_ch = sd.ch_time.size
    for k in range(K):
        t = sd.ts[k]
        while ci < n_ch and sd.ch_time[ci] < t:
            X[sd.ch_subj[ci], sd.ch_col[ci]] = sd.ch_val[ci]
            ci += 1
        active = np.flatnonzero(sd.trt_risk_end >= t)
        if active.size < sd.p:
            flags[k] = 1
            continue
        Xa = X[active]
        y = np.zeros(active.size)
        ev = sd.ev_subj[sd.ev_ptr[k]:sd.ev_ptr[k + 1]]
        y[np.searchsorted(active, ev)] = 1.0
        q, r, piv = scipy.linalg.qr(Xa, mode="economic", pivoting=True)
        diag = np.abs(np.diag(r))
        if diag[0] == 0.0 or diag[-1] <= rank_tol * diag[0]:
            flags[k] = 1
            continue
        beta_piv = scipy.linalg.solve_triangular(r, q.T @ y, lower=False)
        incs[k, piv] = beta_piv
    return incs, flags


def weight_na_sweep(sd: SweepData, increments: np.ndarray, floor: float,
                    probe_times: np.ndarray):
    """Fused likelihood-ratio and weighted hazard sweep.

    Maintains every subject's running likelihood ratio through the pooled
    treatment times and accumulates the weighted event-rate increment at each
    pooled outcome time, using the left-limit ratio on both sides of the
    fraction. Ratios get floored at ``floor`` with a per-subject truncation
    count. ``probe_times`` receive a snapshot of all ratios (values at the
    probe time, right-continuous).

    Returns (na_increments, R_probe, floor_hits, negative_increment_count).
    """
    n = sd.n
    R = np.ones(n)
    X = sd.X0.copy()
    g = sd.g0.copy()
    floor_hits = np.zeros(n, dtype=np.int64)
    neg_count = 0
    probe_times = np.asarray(probe_times, dtype=float)
    R_probe = np.empty((probe_times.size, n))
    na_inc = np.zeros(sd.os_times.size)

    k_t = 0
    k_o = 0
    k_p = 0
    ci = 0
    gi = 0
    K, J, P = sd.ts.size, sd.os_times.size, probe_times.size
    n_ch, n_gch = sd.ch_time.size, sd.gch_time.size
    INF = np.inf
    while True:
        t_out = sd.os_times[k_o] if k_o < J else INF
        t_trt = sd.ts[k_t] if k_t < K else INF
        t_prb = probe_times[k_p] if k_p < P else INF
        t_chg = min(sd.ch_time[ci] if ci < n_ch else INF,
                    sd.gch_time[gi] if gi < n_gch else INF)
        u = min(t_out, t_trt, t_prb, t_chg)
        if u == INF:
            break
        # tie order: outcome, then treatment factor, then probe, then updates
        if t_out == u:
            ar = sd.term_time >= u
            den = float(R[ar].sum())
            if den <= 0.0:
                raise ZeroDenominator(u)
            ev = sd.oev_subj[sd.oev_ptr[k_o]:sd.oev_ptr[k_o + 1]]
            na_inc[k_o] = float(R[ev].sum()) / den
            k_o += 1
            continue
        if t_trt == u:
            active = np.flatnonzero(sd.trt_risk_end >= u)
            if active.size:
                dL = X[active] @ increments[k_t]
                neg_count += int((dL < 0.0).sum())
                dN = np.zeros(active.size)
                ev = sd.ev_subj[sd.ev_ptr[k_t]:sd.ev_ptr[k_t + 1]]
                dN[np.searchsorted(active, ev)] = 1.0
                Rn = R[active] * (1.0 + (g[active] - 1.0) * (dN - dL))
                low = Rn < floor
                if low.any():
                    Rn[low] = floor
                    floor_hits[active[low]] += 1
                R[active] = Rn
            k_t += 1
            continue
        if t_prb == u:
            R_probe[k_p] = R
            k_p += 1
            continue
        while ci < n_ch and sd.ch_time[ci] == u:
            X[sd.ch_subj[ci], sd.ch_col[ci]] = sd.ch_val[ci]
            ci += 1
        while gi < n_gch and sd.gch_time[gi] == u:
            g[sd.gch_subj[gi]] = sd.gch_val[gi]
            gi += 1
    return na_inc, R_probe, floor_hits, neg_count


def derive_states(seed: int, n: int) -> np.ndarray:
    """(n, 4) uint64 words, one deterministic substream state per subject."""
    return np.random.SeedSequence(seed).generate_state(4 * n, np.uint64) \
        .reshape(n, 4)


def _make_generator(words) -> np.random.Generator:
    bg = np.random.PCG64()
    bg.state = {
        "bit_generator": "PCG64",
        "state": {"state": (int(words[0]) << 64) | int(words[1]),
                  "inc": ((int(words[2]) << 64) | int(words[3])) | 1},
        "has_uint32": 0,
        "uinteger": 0,
    }
    return np.random.Generator(bg)


def _draw_normal(rng) -> float:
    """Marsaglia polar normal from uniforms; avoids trig so compiled and
    interpreted backends agree bitwise."""
    while True:
        u = 2.0 * rng.random() - 1.0
        v = 2.0 * rng.random() - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * math.sqrt(-2.0 * math.log(s) / s)


def _draw_exp(rng, rate: float) -> float:
    return -math.log1p(-rng.random()) / rate


def _factor_pair(codes, lci, code, phys0, dial0):
    # (rate factor while uncrossed, rate factor once crossed) for one
    # subject's baseline state; factors multiply in declaration order
    ftype, fb, fcov, fop, fthr, fwhen = codes
    base_vals = (lci, code, phys0, dial0)
    g_un = 1.0
    g_cr = 1.0
    for j in range(ftype.size):
        b = fb[j]
        if ftype[j] == 0:
            g_un *= b
            g_cr *= b
        elif ftype[j] == 1:
            v = base_vals[fcov[j]]
            on = v > fthr[j] if fop[j] == 0 else v <= fthr[j]
            if on:
                g_un *= b
                g_cr *= b
        else:
            if fwhen[j] == 0:    # active while the count is nonzero
                g_cr *= b
                if dial0 != 0.0:
                    g_un *= b
            else:                # active while the count is still zero
                if dial0 == 0.0:
                    g_un *= b
    return g_un, g_cr


def simulate_paths(cfg, codes, n: int, seed: int):
    """Reference path generator: exact competing exponentials between state
    changes, treatment intensity multiplied by the scenario's rate factor.

    Draw order per subject is part of the cross-backend contract: severity
    uniform, disease uniform, backlog uniform, baseline physical normal
    (only when its scale is positive), censoring uniform, then per segment a
    treatment exponential before an outcome exponential. Returns flat
    per-subject arrays consumed by the cohort assembler.
    """
    states = derive_states(seed, n)
    p0, p1 = cfg.disease_probs[0], cfg.disease_probs[0] + cfg.disease_probs[1]
    max_upd = int(math.ceil(cfg.horizon / cfg.physical_update)) + 1
    lci = np.empty(n)
    code = np.empty(n)
    backlog = np.empty(n)
    phys0 = np.empty(n)
    censor = np.empty(n)
    trt_time = np.full(n, np.nan)
    term_time = np.empty(n)
    is_event = np.zeros(n, dtype=np.uint8)
    cross_rec = np.full(n, np.nan)   # crossing observed while untreated
    upd_count = np.zeros(n, dtype=np.int64)
    upd_times = np.zeros((n, max_upd))
    upd_vals = np.zeros((n, max_upd))
    drifts = cfg.physical_drifts
    n_drift = len(drifts)

    for i in range(n):
        rng = _make_generator(states[i])
        x_lci = 8.0 if rng.random() < cfg.p_severe else 4.0
        u = rng.random()
        x_code = 0.0 if u < p0 else (1.0 if u < p1 else 2.0)
        bl = cfg.dialysis_backlog_min + rng.random() * (
            cfg.dialysis_backlog_max - cfg.dialysis_backlog_min)
        ph = cfg.physical_start
        if cfg.physical_sd0 > 0.0:
            ph = min(100.0, max(0.0, ph + cfg.physical_sd0 * _draw_normal(rng)))
        c = cfg.horizon - rng.random() * cfg.entry_spread
        lci[i], code[i], backlog[i], phys0[i], censor[i] = x_lci, x_code, bl, ph, c

        sev = 1.0 if x_lci > 6.0 else 0.0
        crossed = bl >= 2.0
        cross_at = math.inf if crossed else 2.0 - bl
        g_un, g_cr = _factor_pair(codes, x_lci, x_code, ph,
                                  1.0 if crossed else 0.0)
        treated = False
        t = 0.0
        k_upd = 1
        phys = ph
        while True:
            dial = 1.0 if crossed else 0.0
            trt_ind = 1.0 if treated else 0.0
            lam_d = (cfg.out_base + cfg.out_severe * sev
                     + cfg.out_disease * x_code + cfg.out_dial2 * dial
                     + cfg.out_treated * trt_ind
                     + cfg.out_treated_dial * trt_ind * dial)
            boundary = c
            which = 0   # 0 censor, 1 dialysis crossing, 2 physical update
            if not treated:
                if cross_at < boundary:
                    boundary = cross_at
                    which = 1
                nxt = k_upd * cfg.physical_update
                if nxt < boundary:
                    boundary = nxt
                    which = 2
            if treated:
                lam_a = 0.0
            else:
                lam_a = (cfg.trt_base + cfg.trt_severe * sev
                         + cfg.trt_disease * x_code
                         + cfg.trt_physical * phys
                         + cfg.trt_dial2 * dial)
                lam_a *= g_cr if crossed else g_un
            t_a = t + _draw_exp(rng, lam_a) if lam_a > 0.0 else math.inf
            t_d = t + _draw_exp(rng, lam_d) if lam_d > 0.0 else math.inf
            if t_d < boundary and t_d <= t_a:
                term_time[i] = t_d
                is_event[i] = 1
                break
            if t_a < boundary:
                trt_time[i] = t_a
                treated = True
                t = t_a
                continue
            t = boundary
            if which == 0:
                term_time[i] = c
                break
            if which == 1:
                crossed = True
                cross_rec[i] = t
                cross_at = math.inf
                continue
            drift = drifts[min(k_upd - 1, n_drift - 1)] if n_drift else 0.0
            noise = cfg.physical_noise_sd * _draw_normal(rng) \
                if cfg.physical_noise_sd > 0.0 else 0.0
            phys = min(100.0, max(0.0, phys - drift + noise))
            j = upd_count[i]
            upd_times[i, j] = t
            upd_vals[i, j] = phys
            upd_count[i] = j + 1
            k_upd += 1
    return (lci, code, backlog, phys0, censor, trt_time, term_time, is_event,
            cross_rec, upd_count, upd_times, upd_vals)
