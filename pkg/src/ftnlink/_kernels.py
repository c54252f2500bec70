"""Compiled inner loops (numba). Callers validate inputs; kernels assume
contiguous arrays of the documented dtypes."""

from __future__ import annotations

import math

import numpy as np
from numba import njit

NEG_INF = -1e300


@njit(cache=True, inline="always")
def _maxstar(a, b, exact):
    if a < b:
        a, b = b, a
    if b <= NEG_INF:
        return a
    if exact:
        return a + math.log1p(math.exp(b - a))
    return a


@njit(cache=True)
def rsc_encode(u, n_tail):
    """(1, 5/7) RSC encoder. Returns (parity, tail_sys, tail_par)."""
    n = u.size
    par = np.empty(n, np.int8)
    s1 = 0
    s2 = 0
    for k in range(n):
        a = u[k] ^ s1 ^ s2
        par[k] = a ^ s2
        s2 = s1
        s1 = a
    tail_sys = np.empty(n_tail, np.int8)
    tail_par = np.empty(n_tail, np.int8)
    for k in range(n_tail):
        uu = s1 ^ s2
        a = 0
        tail_sys[k] = uu
        tail_par[k] = a ^ s2
        s2 = s1
        s1 = a
    return par, tail_sys, tail_par


@njit(cache=True)
def rsc_log_map(lsys, lpar, n_info, exact):
    """Log-MAP BCJR on the 4-state (1, 5/7) RSC trellis.

    ``lsys``/``lpar`` have length n_info + 2 (tail included); LLRs are
    ln P(0)/P(1). Returns posterior LLRs of systematic and parity bits.
    """
    T = lsys.size
    S = 4
    alpha = np.full((T + 1, S), NEG_INF)
    beta = np.full((T + 1, S), NEG_INF)
    alpha[0, 0] = 0.0
    beta[T, 0] = 0.0
    nxt = np.empty((S, 2), np.int64)
    pout = np.empty((S, 2), np.int64)
    for st in range(S):
        s1 = st >> 1
        s2 = st & 1
        for u in range(2):
            a = u ^ s1 ^ s2
            nxt[st, u] = (a << 1) | s1
            pout[st, u] = a ^ s2
    # tail steps only allow the input that feeds a zero into the register
    for k in range(T):
        tail = k >= n_info
        for st in range(S):
            if alpha[k, st] <= NEG_INF:
                continue
            for u in range(2):
                if tail and (u != ((st >> 1) ^ (st & 1))):
                    continue
                g = 0.5 * ((1 - 2 * u) * lsys[k] + (1 - 2 * pout[st, u]) * lpar[k])
                ns = nxt[st, u]
                alpha[k + 1, ns] = _maxstar(alpha[k + 1, ns], alpha[k, st] + g, exact)
        m = alpha[k + 1].max()
        for st in range(S):
            if alpha[k + 1, st] > NEG_INF:
                alpha[k + 1, st] -= m
    for k in range(T - 1, -1, -1):
        tail = k >= n_info
        for st in range(S):
            acc = NEG_INF
            for u in range(2):
                if tail and (u != ((st >> 1) ^ (st & 1))):
                    continue
                ns = nxt[st, u]
                if beta[k + 1, ns] <= NEG_INF:
                    continue
                g = 0.5 * ((1 - 2 * u) * lsys[k] + (1 - 2 * pout[st, u]) * lpar[k])
                acc = _maxstar(acc, beta[k + 1, ns] + g, exact)
            beta[k, st] = acc
        m = beta[k].max()
        for st in range(S):
            if beta[k, st] > NEG_INF:
                beta[k, st] -= m
    post_sys = np.empty(T)
    post_par = np.empty(T)
    for k in range(T):
        tail = k >= n_info
        u0 = NEG_INF
        u1 = NEG_INF
        p0 = NEG_INF
        p1 = NEG_INF
        for st in range(S):
            if alpha[k, st] <= NEG_INF:
                continue
            for u in range(2):
                if tail and (u != ((st >> 1) ^ (st & 1))):
                    continue
                ns = nxt[st, u]
                if beta[k + 1, ns] <= NEG_INF:
                    continue
                p = pout[st, u]
                g = 0.5 * ((1 - 2 * u) * lsys[k] + (1 - 2 * p) * lpar[k])
                v = alpha[k, st] + g + beta[k + 1, ns]
                if u == 0:
                    u0 = _maxstar(u0, v, exact)
                else:
                    u1 = _maxstar(u1, v, exact)
                if p == 0:
                    p0 = _maxstar(p0, v, exact)
                else:
                    p1 = _maxstar(p1, v, exact)
        post_sys[k] = u0 - u1
        post_par[k] = p0 - p1
    return post_sys, post_par


@njit(cache=True)
def isi_bcjr(samples, branch_out, head_out, next_state, log_prior, noise_var, exact):
    """Symbol-wise log-APPs over an ISI trellis.

    ``branch_out[s, x]`` is the noiseless sample for state s and input x;
    ``head_out[k]`` replaces it for the first few steps (known history).
    Returns app[k, x] = log P(x_k = x | all samples), unnormalized.
    """
    T = samples.size
    S, L = branch_out.shape
    n_head = head_out.shape[0]
    inv2v = 0.5 / noise_var
    alpha = np.empty((T + 1, S))
    alpha[0, :] = 0.0
    gam = np.empty((S, L))
    for k in range(T):
        bo = head_out[k] if k < n_head else branch_out
        nxt_a = np.full(S, NEG_INF)
        for st in range(S):
            for x in range(L):
                d = samples[k] - bo[st, x]
                v = alpha[k, st] - d * d * inv2v + log_prior[k, x]
                ns = next_state[st, x]
                nxt_a[ns] = _maxstar(nxt_a[ns], v, exact)
        m = nxt_a.max()
        for st in range(S):
            alpha[k + 1, st] = nxt_a[st] - m
    beta = np.zeros(S)
    app = np.empty((T, L))
    for k in range(T - 1, -1, -1):
        bo = head_out[k] if k < n_head else branch_out
        newb = np.full(S, NEG_INF)
        for x in range(L):
            app[k, x] = NEG_INF
        for st in range(S):
            for x in range(L):
                d = samples[k] - bo[st, x]
                g = -d * d * inv2v + log_prior[k, x]
                ns = next_state[st, x]
                v = g + beta[ns]
                newb[st] = _maxstar(newb[st], v, exact)
                app[k, x] = _maxstar(app[k, x], alpha[k, st] + v, exact)
        m = newb.max()
        for st in range(S):
            beta[st] = newb[st] - m
    return app


@njit(cache=True)
def ptprdfe_run(x, center0, n_sym, sps, ff, fb, h_pr, points, known, n_known, phase,
                mu_ff, mu_fb, mu_phase, hist, ref_power):
    """Phase-tracking partial-response DFE over ``n_sym`` symbols.

    Symbol k is centred on input sample ``center0 + sps*k``. The first
    ``n_known`` symbols use ``known`` instead of decisions (data-aided).
    ``ref_power`` is E|d|^2 of the PR-domain reference.
    ``hist`` holds past decisions (most recent first) that seed the
    feedback; it is updated in place. Returns outputs y (PR domain,
    phase-corrected, residual feedback removed), decisions, phase trace
    and error powers; ff, fb are updated in place.
    """
    n_ff = ff.size
    half = n_ff // 2
    n_fb = fb.size
    n_pr = h_pr.size
    y_out = np.empty(n_sym, np.complex128)
    dec = np.empty(n_sym, np.complex128)
    ph_tr = np.empty(n_sym)
    err = np.empty(n_sym)
    nx = x.size
    depth = hist.size
    buf = np.empty(n_ff, np.complex128)
    for k in range(n_sym):
        c = center0 + sps * k
        z = 0.0 + 0.0j
        for i in range(n_ff):
            j = c - half + i
            if 0 <= j < nx:
                buf[i] = x[j]
            else:
                buf[i] = 0.0
            z += ff[i] * buf[i]
        rot = complex(math.cos(phase), -math.sin(phase))
        y = z * rot
        r = 0.0 + 0.0j
        for j in range(n_fb):
            r += fb[j] * hist[j]
        y = y - r
        v = 0.0 + 0.0j
        for m in range(1, n_pr):
            v += h_pr[m] * hist[m - 1]
        if k < n_known:
            s = known[k]
        else:
            q = y - v
            best = 0
            bd = 1e300
            for p in range(points.size):
                dd = q - points[p]
                dist = dd.real * dd.real + dd.imag * dd.imag
                if dist < bd:
                    bd = dist
                    best = p
            s = points[best]
        d = h_pr[0] * s + v
        e = d - y
        if mu_ff != 0.0:
            g = e * rot.conjugate()
            for i in range(n_ff):
                ff[i] += mu_ff * g * buf[i].conjugate()
        if mu_fb != 0.0:
            for j in range(n_fb):
                fb[j] -= mu_fb * e * hist[j].conjugate()
        # small-angle phase detector Im(y d*)/E|d|^2; unlike angle(y d*) it is
        # unbiased at the LMS equilibrium, so taps and phase do not co-drift
        prod = y * d.conjugate()
        phase += mu_phase * prod.imag / ref_power
        for j in range(depth - 1, 0, -1):
            hist[j] = hist[j - 1]
        if depth > 0:
            hist[0] = s
        y_out[k] = y
        dec[k] = s
        ph_tr[k] = phase
        err[k] = e.real * e.real + e.imag * e.imag
    return y_out, dec, ph_tr, err, phase
