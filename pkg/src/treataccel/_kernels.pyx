# cython: language_level=3
"""Compiled versions of the three hot kernels: path simulation, the
per-event-time least-squares sweep, and the fused weight/hazard sweep.

Each function is a drop-in replacement for its namesake in the numpy
backend. The simulator reproduces the numpy draws bitwise: identical
per-subject generator states, identical draw order, and transcendental
calls routed through the same libm. The sweeps follow the same event
ordering rules; their floating-point results agree with the numpy backend
to rounding (summation trees differ), and rank decisions use the same
pivoted-triangular diagonal test.
"""

from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.math cimport INFINITY, ceil, fabs, log, log1p, sqrt
from libc.stdlib cimport free, malloc
from libc.string cimport memcpy, memset

import numpy as np

from numpy.random cimport bitgen_t

from numpy.random import PCG64

from ._purepy import RANK_TOL, ZeroDenominator, derive_states


cdef inline double _next(bitgen_t *rng) noexcept nogil:
    return rng.next_double(rng.state)


cdef inline double _draw_exp(bitgen_t *rng, double rate) noexcept nogil:
    return -log1p(-_next(rng)) / rate


cdef inline double _draw_normal(bitgen_t *rng) noexcept nogil:
    # Marsaglia polar, matching the interpreted backend draw for draw
    cdef double u, v, s
    while True:
        u = 2.0 * _next(rng) - 1.0
        v = 2.0 * _next(rng) - 1.0
        s = u * u + v * v
        if 0.0 < s < 1.0:
            return u * sqrt(-2.0 * log(s) / s)


cdef double _factor_pair_c(long[::1] ftype, double[::1] fb, long[::1] fcov,
                           long[::1] fop, double[::1] fthr, long[::1] fwhen,
                           double lci, double code, double phys0, double dial0,
                           double *g_cr) noexcept nogil:
    cdef double g_un = 1.0
    cdef double gc = 1.0
    cdef double b, v
    cdef Py_ssize_t j
    cdef bint on
    cdef double base_vals[4]
    base_vals[0] = lci
    base_vals[1] = code
    base_vals[2] = phys0
    base_vals[3] = dial0
    for j in range(ftype.shape[0]):
        b = fb[j]
        if ftype[j] == 0:
            g_un *= b
            gc *= b
        elif ftype[j] == 1:
            v = base_vals[fcov[j]]
            on = v > fthr[j] if fop[j] == 0 else v <= fthr[j]
            if on:
                g_un *= b
                gc *= b
        else:
            if fwhen[j] == 0:
                gc *= b
                if dial0 != 0.0:
                    g_un *= b
            else:
                if dial0 == 0.0:
                    g_un *= b
    g_cr[0] = gc
    return g_un


def simulate_paths(cfg, codes, Py_ssize_t n, seed):
    cdef double horizon = cfg.horizon
    cdef double p_severe = cfg.p_severe
    cdef double p0 = cfg.disease_probs[0]
    cdef double p1 = cfg.disease_probs[0] + cfg.disease_probs[1]
    cdef double bl_min = cfg.dialysis_backlog_min
    cdef double bl_span = cfg.dialysis_backlog_max - cfg.dialysis_backlog_min
    cdef double physical_start = cfg.physical_start
    cdef double physical_sd0 = cfg.physical_sd0
    cdef double physical_update = cfg.physical_update
    cdef double physical_noise_sd = cfg.physical_noise_sd
    cdef double entry_spread = cfg.entry_spread
    cdef double trt_base = cfg.trt_base
    cdef double trt_severe = cfg.trt_severe
    cdef double trt_disease = cfg.trt_disease
    cdef double trt_physical = cfg.trt_physical
    cdef double trt_dial2 = cfg.trt_dial2
    cdef double out_base = cfg.out_base
    cdef double out_severe = cfg.out_severe
    cdef double out_disease = cfg.out_disease
    cdef double out_dial2 = cfg.out_dial2
    cdef double out_treated = cfg.out_treated
    cdef double out_treated_dial = cfg.out_treated_dial
    cdef double[::1] drifts = np.asarray(cfg.physical_drifts, dtype=float)
    cdef Py_ssize_t n_drift = drifts.shape[0]

    cdef long[::1] ftype
    cdef double[::1] fb
    cdef long[::1] fcov
    cdef long[::1] fop
    cdef double[::1] fthr
    cdef long[::1] fwhen
    ftype, fb, fcov, fop, fthr, fwhen = codes

    states = derive_states(seed, n)
    cdef Py_ssize_t max_upd = <Py_ssize_t>ceil(horizon / physical_update) + 1

    lci_a = np.empty(n); code_a = np.empty(n); backlog_a = np.empty(n)
    phys0_a = np.empty(n); censor_a = np.empty(n)
    trt_time_a = np.full(n, np.nan); term_time_a = np.empty(n)
    is_event_a = np.zeros(n, dtype=np.uint8)
    cross_rec_a = np.full(n, np.nan)
    upd_count_a = np.zeros(n, dtype=np.int64)
    upd_times_a = np.zeros((n, max_upd)); upd_vals_a = np.zeros((n, max_upd))

    cdef double[::1] lci = lci_a
    cdef double[::1] code = code_a
    cdef double[::1] backlog = backlog_a
    cdef double[::1] phys0 = phys0_a
    cdef double[::1] censor = censor_a
    cdef double[::1] trt_time = trt_time_a
    cdef double[::1] term_time = term_time_a
    cdef unsigned char[::1] is_event = is_event_a
    cdef double[::1] cross_rec = cross_rec_a
    cdef long[::1] upd_count = upd_count_a
    cdef double[:, ::1] upd_times = upd_times_a
    cdef double[:, ::1] upd_vals = upd_vals_a

    pcg = PCG64()
    cdef bitgen_t *rng = <bitgen_t *>PyCapsule_GetPointer(pcg.capsule,
                                                          "BitGenerator")
    cdef Py_ssize_t i, k_upd, j
    cdef double x_lci, u, x_code, bl, ph, c, sev, cross_at, g_un, g_cr
    cdef double t, phys, dial, lam_a, lam_d, t_a, t_d, boundary, nxt
    cdef double drift, noise, trt_ind
    cdef bint crossed, treated
    cdef int which

    for i in range(n):
        w = states[i]
        pcg.state = {
            "bit_generator": "PCG64",
            "state": {"state": (int(w[0]) << 64) | int(w[1]),
                      "inc": ((int(w[2]) << 64) | int(w[3])) | 1},
            "has_uint32": 0,
            "uinteger": 0,
        }
        x_lci = 8.0 if _next(rng) < p_severe else 4.0
        u = _next(rng)
        x_code = 0.0 if u < p0 else (1.0 if u < p1 else 2.0)
        bl = bl_min + _next(rng) * bl_span
        ph = physical_start
        if physical_sd0 > 0.0:
            ph = ph + physical_sd0 * _draw_normal(rng)
            if ph > 100.0:
                ph = 100.0
            elif ph < 0.0:
                ph = 0.0
        c = horizon - _next(rng) * entry_spread
        lci[i] = x_lci; code[i] = x_code; backlog[i] = bl
        phys0[i] = ph; censor[i] = c

        sev = 1.0 if x_lci > 6.0 else 0.0
        crossed = bl >= 2.0
        cross_at = INFINITY if crossed else 2.0 - bl
        g_un = _factor_pair_c(ftype, fb, fcov, fop, fthr, fwhen,
                              x_lci, x_code, ph, 1.0 if crossed else 0.0,
                              &g_cr)
        treated = False
        t = 0.0
        k_upd = 1
        phys = ph
        while True:
            dial = 1.0 if crossed else 0.0
            trt_ind = 1.0 if treated else 0.0
            lam_d = (out_base + out_severe * sev + out_disease * x_code
                     + out_dial2 * dial + out_treated * trt_ind
                     + out_treated_dial * trt_ind * dial)
            boundary = c
            which = 0
            if not treated:
                if cross_at < boundary:
                    boundary = cross_at
                    which = 1
                nxt = k_upd * physical_update
                if nxt < boundary:
                    boundary = nxt
                    which = 2
            if treated:
                lam_a = 0.0
            else:
                lam_a = (trt_base + trt_severe * sev + trt_disease * x_code
                         + trt_physical * phys + trt_dial2 * dial)
                lam_a *= g_cr if crossed else g_un
            t_a = t + _draw_exp(rng, lam_a) if lam_a > 0.0 else INFINITY
            t_d = t + _draw_exp(rng, lam_d) if lam_d > 0.0 else INFINITY
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
                cross_at = INFINITY
                continue
            drift = drifts[k_upd - 1 if k_upd - 1 < n_drift else n_drift - 1] \
                if n_drift else 0.0
            noise = physical_noise_sd * _draw_normal(rng) \
                if physical_noise_sd > 0.0 else 0.0
            phys = phys - drift + noise
            if phys > 100.0:
                phys = 100.0
            elif phys < 0.0:
                phys = 0.0
            j = upd_count[i]
            upd_times[i, j] = t
            upd_vals[i, j] = phys
            upd_count[i] = j + 1
            k_upd += 1
    return (lci_a, code_a, backlog_a, phys0_a, censor_a, trt_time_a,
            term_time_a, is_event_a, cross_rec_a, upd_count_a,
            upd_times_a, upd_vals_a)


cdef inline Py_ssize_t _bisect(long *arr, Py_ssize_t size, long key) noexcept nogil:
    # position of key in a sorted index array; key must be present
    cdef Py_ssize_t lo = 0, hi = size, mid
    while lo < hi:
        mid = (lo + hi) // 2
        if arr[mid] < key:
            lo = mid + 1
        else:
            hi = mid
    return lo


def aalen_sweep(sd, double rank_tol=RANK_TOL):
    cdef double[::1] ts = sd.ts
    cdef long[::1] ev_ptr = sd.ev_ptr
    cdef long[::1] ev_subj = sd.ev_subj
    cdef double[::1] risk_end = sd.trt_risk_end
    cdef double[::1] ch_time = sd.ch_time
    cdef long[::1] ch_subj = sd.ch_subj
    cdef long[::1] ch_col = sd.ch_col
    cdef double[::1] ch_val = sd.ch_val
    cdef Py_ssize_t K = ts.shape[0]
    cdef Py_ssize_t n = sd.n
    cdef Py_ssize_t p = sd.p

    X_a = sd.X0.copy()
    incs_a = np.zeros((K, p))
    flags_a = np.zeros(K, dtype=np.uint8)
    cdef double[:, ::1] X = X_a
    cdef double[:, ::1] incs = incs_a
    cdef unsigned char[::1] flags = flags_a

    cdef long *active = <long *>malloc(n * sizeof(long))
    # column-major work buffer: p columns of length n, plus y and scratch
    cdef double *A = <double *>malloc(n * p * sizeof(double))
    cdef double *y = <double *>malloc(n * sizeof(double))
    cdef double *beta = <double *>malloc(p * sizeof(double))
    cdef long *piv = <long *>malloc(p * sizeof(long))
    if active == NULL or A == NULL or y == NULL or beta == NULL or piv == NULL:
        free(active); free(A); free(y); free(beta); free(piv)
        raise MemoryError()

    cdef Py_ssize_t k, ci, i, m, j, jj, best, e
    cdef double t, nrm, best_nrm, alpha, scale, dot, diag0, diagj
    cdef long tmp
    cdef double *cj
    cdef double *ck
    try:
        ci = 0
        for k in range(K):
            t = ts[k]
            while ci < ch_time.shape[0] and ch_time[ci] < t:
                X[ch_subj[ci], ch_col[ci]] = ch_val[ci]
                ci += 1
            m = 0
            for i in range(n):
                if risk_end[i] >= t:
                    active[m] = i
                    m += 1
            if m < p:
                flags[k] = 1
                continue
            for j in range(p):
                cj = A + j * m
                for i in range(m):
                    cj[i] = X[active[i], j]
                piv[j] = j
            memset(y, 0, m * sizeof(double))
            for e in range(ev_ptr[k], ev_ptr[k + 1]):
                y[_bisect(active, m, ev_subj[e])] = 1.0

            # Householder QR, pivoting on the largest remaining column norm
            for j in range(p):
                best = j
                best_nrm = -1.0
                for jj in range(j, p):
                    cj = A + jj * m
                    nrm = 0.0
                    for i in range(j, m):
                        nrm += cj[i] * cj[i]
                    if nrm > best_nrm:
                        best_nrm = nrm
                        best = jj
                if best != j:
                    cj = A + j * m
                    ck = A + best * m
                    for i in range(m):
                        dot = cj[i]; cj[i] = ck[i]; ck[i] = dot
                    tmp = piv[j]; piv[j] = piv[best]; piv[best] = tmp
                cj = A + j * m
                nrm = sqrt(best_nrm)
                if nrm == 0.0:
                    cj[j] = 0.0
                    continue
                alpha = cj[j]
                # reflector v stored in rows j..m of column j
                cj[j] = alpha + nrm if alpha >= 0.0 else alpha - nrm
                dot = 0.0
                for i in range(j, m):
                    dot += cj[i] * cj[i]
                if dot > 0.0:
                    scale = 2.0 / dot
                    for jj in range(j + 1, p):
                        ck = A + jj * m
                        dot = 0.0
                        for i in range(j, m):
                            dot += cj[i] * ck[i]
                        dot *= scale
                        for i in range(j, m):
                            ck[i] -= dot * cj[i]
                    dot = 0.0
                    for i in range(j, m):
                        dot += cj[i] * y[i]
                    dot *= scale
                    for i in range(j, m):
                        y[i] -= dot * cj[i]
                cj[j] = -nrm if alpha >= 0.0 else nrm

            diag0 = fabs(A[0])
            diagj = fabs(A[(p - 1) * m + (p - 1)])
            if diag0 == 0.0 or diagj <= rank_tol * diag0:
                flags[k] = 1
                continue
            for j in range(p - 1, -1, -1):
                dot = y[j]
                for jj in range(j + 1, p):
                    dot -= A[jj * m + j] * beta[jj]
                beta[j] = dot / A[j * m + j]
            for j in range(p):
                incs[k, piv[j]] = beta[j]
    finally:
        free(active); free(A); free(y); free(beta); free(piv)
    return incs_a, flags_a


def weight_na_sweep(sd, increments, double floor, probe_times):
    cdef double[::1] ts = sd.ts
    cdef long[::1] ev_ptr = sd.ev_ptr
    cdef long[::1] ev_subj = sd.ev_subj
    cdef double[::1] risk_end = sd.trt_risk_end
    cdef double[::1] term_time = sd.term_time
    cdef unsigned char[::1] is_event = sd.is_event
    cdef double[::1] os_times = sd.os_times
    cdef long[::1] oev_ptr = sd.oev_ptr
    cdef long[::1] oev_subj = sd.oev_subj
    cdef double[::1] ch_time = sd.ch_time
    cdef long[::1] ch_subj = sd.ch_subj
    cdef long[::1] ch_col = sd.ch_col
    cdef double[::1] ch_val = sd.ch_val
    cdef double[::1] gch_time = sd.gch_time
    cdef long[::1] gch_subj = sd.gch_subj
    cdef double[::1] gch_val = sd.gch_val
    cdef double[:, ::1] inc = np.ascontiguousarray(increments, dtype=float)

    cdef Py_ssize_t n = sd.n
    cdef Py_ssize_t p = sd.p
    cdef Py_ssize_t K = ts.shape[0]
    cdef Py_ssize_t J = os_times.shape[0]

    probe_a = np.asarray(probe_times, dtype=float)
    cdef double[::1] prb = probe_a
    cdef Py_ssize_t P = prb.shape[0]

    X_a = sd.X0.copy()
    cdef double[:, ::1] X = X_a
    g_a = sd.g0.copy()
    cdef double[::1] g = g_a
    R_a = np.ones(n)
    cdef double[::1] R = R_a
    hits_a = np.zeros(n, dtype=np.int64)
    cdef long[::1] floor_hits = hits_a
    R_probe_a = np.empty((P, n))
    cdef double[:, ::1] R_probe = R_probe_a
    na_a = np.zeros(J)
    cdef double[::1] na_inc = na_a

    cdef Py_ssize_t k_t = 0, k_o = 0, k_p = 0, ci = 0, gi = 0
    cdef Py_ssize_t i, j, e
    cdef long neg_count = 0
    cdef double t_out, t_trt, t_prb, t_chg, u, den, num, dL, dN, r
    cdef double zero_at = 0.0
    cdef bint zero_den = False
    cdef unsigned char *jumped = <unsigned char *>malloc(n)
    if jumped == NULL:
        raise MemoryError()
    memset(jumped, 0, n)

    with nogil:
        while True:
            t_out = os_times[k_o] if k_o < J else INFINITY
            t_trt = ts[k_t] if k_t < K else INFINITY
            t_prb = prb[k_p] if k_p < P else INFINITY
            t_chg = ch_time[ci] if ci < ch_time.shape[0] else INFINITY
            if gi < gch_time.shape[0] and gch_time[gi] < t_chg:
                t_chg = gch_time[gi]
            u = t_out
            if t_trt < u:
                u = t_trt
            if t_prb < u:
                u = t_prb
            if t_chg < u:
                u = t_chg
            if u == INFINITY:
                break
            if t_out == u:
                den = 0.0
                num = 0.0
                for i in range(n):
                    if term_time[i] >= u:
                        den += R[i]
                if den <= 0.0:
                    zero_den = True
                    zero_at = u
                    break
                for e in range(oev_ptr[k_o], oev_ptr[k_o + 1]):
                    num += R[oev_subj[e]]
                na_inc[k_o] = num / den
                k_o += 1
                continue
            if t_trt == u:
                for e in range(ev_ptr[k_t], ev_ptr[k_t + 1]):
                    jumped[ev_subj[e]] = 1
                for i in range(n):
                    if risk_end[i] >= u:
                        dL = 0.0
                        for j in range(p):
                            dL += X[i, j] * inc[k_t, j]
                        if dL < 0.0:
                            neg_count += 1
                        dN = 1.0 if jumped[i] else 0.0
                        r = R[i] * (1.0 + (g[i] - 1.0) * (dN - dL))
                        if r < floor:
                            r = floor
                            floor_hits[i] += 1
                        R[i] = r
                for e in range(ev_ptr[k_t], ev_ptr[k_t + 1]):
                    jumped[ev_subj[e]] = 0
                k_t += 1
                continue
            if t_prb == u:
                memcpy(&R_probe[k_p, 0], &R[0], n * sizeof(double))
                k_p += 1
                continue
            while ci < ch_time.shape[0] and ch_time[ci] == u:
                X[ch_subj[ci], ch_col[ci]] = ch_val[ci]
                ci += 1
            while gi < gch_time.shape[0] and gch_time[gi] == u:
                g[gch_subj[gi]] = gch_val[gi]
                gi += 1
    free(jumped)
    if zero_den:
        raise ZeroDenominator(zero_at)
    return na_a, R_probe_a, hits_a, neg_count
