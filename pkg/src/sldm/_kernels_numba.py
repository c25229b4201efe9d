"""Numba-compiled kernel implementations (fast backend).

Twins of ``sldm._kernels_numpy`` with identical names, signatures, and
semantics; see that module for the shared conventions. The Bessel evaluation
here scans the 50-term series around its peak term with ratio recurrences,
which is algebraically the same log-sum-exp as the numpy twin but needs no
per-term ``exp``/``lgamma``.
"""

import math

import numpy as np
from numba import njit

N_TERMS = 50
RATE_LOG_FLOOR = float(np.log(1e-30))
SAMPLE_LOG_CEIL = float(np.log(1e12))
TAIL_TOL = 1e-12
_DIST_EPS = 1e-12
_DROP_TOL = 1e-20


# ---------------------------------------------------------------------------
# Bessel series
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _bessel_core(nu, x):
    """(log I_nu(x), I_{nu+1}/I_nu, tail fraction) from the 50-term series."""
    if x <= 0.0:
        if nu == 0:
            return 0.0, 0.0, 0.0
        return -np.inf, 0.0, 0.0
    h = 0.5 * x
    q = h * h
    kstar = 0
    while kstar < N_TERMS - 1:
        if q < (kstar + 1.0) * (nu + kstar + 1.0):
            break
        kstar += 1
    log_peak = (nu + 2.0 * kstar) * math.log(h) \
        - math.lgamma(kstar + 1.0) - math.lgamma(nu + kstar + 1.0)
    acc1 = 1.0
    acc2 = h / (nu + kstar + 1.0)
    s = 1.0
    s_last = 1.0 if kstar == N_TERMS - 1 else 0.0
    for k in range(kstar + 1, N_TERMS):
        s *= q / (k * (nu + k))
        acc1 += s
        acc2 += s * h / (nu + k + 1.0)
        if k == N_TERMS - 1:
            s_last = s
        elif s < _DROP_TOL * acc1:
            break
    s = 1.0
    for k in range(kstar, 0, -1):
        s *= (k * (nu + k)) / q
        acc1 += s
        acc2 += s * h / (nu + k)
        if s < _DROP_TOL * acc1:
            break
    ratio = acc2 / acc1
    if ratio < 0.0:
        ratio = 0.0
    elif ratio > 1.0:
        ratio = 1.0
    return log_peak + math.log(acc1), ratio, s_last / acc1


@njit(cache=True)
def log_bessel_i_arr(orders, x):
    """1-D int64 orders and same-length float64 x -> (log values, tail fractions)."""
    out = np.empty(orders.size, np.float64)
    tail = np.empty(orders.size, np.float64)
    for n in range(orders.size):
        v, _, t = _bessel_core(orders[n], x[n])
        out[n] = v
        tail[n] = t
    return out, tail


@njit(cache=True)
def bessel_ratio_arr(orders, x):
    out = np.empty(orders.size, np.float64)
    for n in range(orders.size):
        _, r, _ = _bessel_core(orders[n], x[n])
        out[n] = r
    return out


# ---------------------------------------------------------------------------
# Poisson sampling
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _poisson_one(lam, rng):
    if lam < 30.0:
        L = math.exp(-lam)
        k = 0
        p = 1.0
        while True:
            p *= rng.random()
            if p <= L:
                return k
            k += 1
    b = 0.931 + 2.53 * math.sqrt(lam)
    a = -0.059 + 0.02483 * b
    inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
    vr = 0.9277 - 3.6224 / (b - 2.0)
    while True:
        u = rng.random() - 0.5
        v = rng.random()
        us = 0.5 - abs(u)
        kf = math.floor((2.0 * a / us + b) * u + lam + 0.43)
        if us >= 0.07 and v <= vr:
            return int(kf)
        if kf < 0.0 or (us < 0.013 and v > us):
            continue
        if (math.log(v) + math.log(inv_alpha) - math.log(a / (us * us) + b)
                <= kf * math.log(lam) - lam - math.lgamma(kf + 1.0)):
            return int(kf)


@njit(cache=True)
def poisson_sample_arr(lam, rng):
    """Poisson draws for a 1-D float64 rate array."""
    out = np.empty(lam.size, np.int64)
    for n in range(lam.size):
        out[n] = _poisson_one(lam[n], rng)
    return out


# ---------------------------------------------------------------------------
# block loss / gradient
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _dyad_eval(y, apos, aneg):
    """Per-dyad loss term and the two log-rate gradients (q+, q-)."""
    lapos = apos if apos > RATE_LOG_FLOOR else RATE_LOG_FLOOR
    laneg = aneg if aneg > RATE_LOG_FLOOR else RATE_LOG_FLOOR
    lpos = math.exp(lapos)
    lneg = math.exp(laneg)
    xarg = 2.0 * math.exp(0.5 * (lapos + laneg))
    nu = int(abs(y))
    log_i, ratio, tailf = _bessel_core(nu, xarg)
    term = lpos + lneg - 0.5 * y * (lapos - laneg) - log_i
    half_xr = 0.5 * xarg * ratio
    qpos = lpos - 0.5 * (y + nu) - half_xr if apos > RATE_LOG_FLOOR else 0.0
    qneg = lneg + 0.5 * (y - nu) - half_xr if aneg > RATE_LOG_FLOOR else 0.0
    return term, qpos, qneg, tailf


@njit(cache=True)
def und_loss(E, epos, eneg, members, indptr, indices, weights):
    K = E.shape[0]
    B = members.size
    loss = 0.0
    n_noconv = 0
    for a in range(B):
        i = members[a]
        p = indptr[i]
        pe = indptr[i + 1]
        for b in range(a + 1, B):
            j = members[b]
            while p < pe and indices[p] < j:
                p += 1
            y = weights[p] if (p < pe and indices[p] == j) else 0.0
            d2 = 0.0
            for c in range(K):
                t = E[c, i] - E[c, j]
                d2 += t * t
            d = math.sqrt(d2)
            term, _, _, tailf = _dyad_eval(y, epos[i] + epos[j] - d, eneg[i] + eneg[j] + d)
            if tailf > TAIL_TOL:
                n_noconv += 1
            if not math.isfinite(term):
                return np.inf, i, j, n_noconv
            loss += term
    return loss, -1, -1, n_noconv


@njit(cache=True)
def und_loss_grad(E, epos, eneg, members, indptr, indices, weights):
    K, N = E.shape
    B = members.size
    gE = np.zeros((K, N))
    gpos = np.zeros(N)
    gneg = np.zeros(N)
    loss = 0.0
    n_noconv = 0
    for a in range(B):
        i = members[a]
        p = indptr[i]
        pe = indptr[i + 1]
        for b in range(a + 1, B):
            j = members[b]
            while p < pe and indices[p] < j:
                p += 1
            y = weights[p] if (p < pe and indices[p] == j) else 0.0
            d2 = 0.0
            for c in range(K):
                t = E[c, i] - E[c, j]
                d2 += t * t
            d = math.sqrt(d2)
            term, qp, qn, tailf = _dyad_eval(y, epos[i] + epos[j] - d, eneg[i] + eneg[j] + d)
            if tailf > TAIL_TOL:
                n_noconv += 1
            if not math.isfinite(term):
                return np.inf, gE, gpos, gneg, i, j, n_noconv
            loss += term
            gpos[i] += qp
            gpos[j] += qp
            gneg[i] += qn
            gneg[j] += qn
            if d > _DIST_EPS:
                coef = (qn - qp) / d
                for c in range(K):
                    g = coef * (E[c, i] - E[c, j])
                    gE[c, i] += g
                    gE[c, j] -= g
    return loss, gE, gpos, gneg, -1, -1, n_noconv


@njit(cache=True)
def dir_loss(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
             use_neg_embed, members, indptr, indices, weights):
    K = Esrc.shape[0]
    B = members.size
    loss = 0.0
    n_noconv = 0
    for a in range(B):
        i = members[a]
        p = indptr[i]
        pe = indptr[i + 1]
        for b in range(B):
            j = members[b]
            while p < pe and indices[p] < j:
                p += 1
            if b == a:
                continue
            y = weights[p] if (p < pe and indices[p] == j) else 0.0
            dp2 = 0.0
            for c in range(K):
                t = Esrc[c, i] - Etgt[c, j]
                dp2 += t * t
            dp = math.sqrt(dp2)
            if use_neg_embed:
                dn2 = 0.0
                for c in range(K):
                    t = Eneg[c, i] - Etgt[c, j]
                    dn2 += t * t
                dn = math.sqrt(dn2)
            else:
                dn = dp
            term, _, _, tailf = _dyad_eval(
                y, bpos[i] + gpos_eff[j] - dp, dneg[i] + eneg_eff[j] + neg_sign * dn)
            if tailf > TAIL_TOL:
                n_noconv += 1
            if not math.isfinite(term):
                return np.inf, i, j, n_noconv
            loss += term
    return loss, -1, -1, n_noconv


@njit(cache=True)
def dir_loss_grad(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
                  use_neg_embed, members, indptr, indices, weights):
    K, N = Esrc.shape
    B = members.size
    gS = np.zeros((K, N))
    gU = np.zeros((K, N))
    gT = np.zeros((K, N))
    gb = np.zeros(N)
    gg = np.zeros(N)
    gd = np.zeros(N)
    ge = np.zeros(N)
    loss = 0.0
    n_noconv = 0
    for a in range(B):
        i = members[a]
        p = indptr[i]
        pe = indptr[i + 1]
        for b in range(B):
            j = members[b]
            while p < pe and indices[p] < j:
                p += 1
            if b == a:
                continue
            y = weights[p] if (p < pe and indices[p] == j) else 0.0
            dp2 = 0.0
            for c in range(K):
                t = Esrc[c, i] - Etgt[c, j]
                dp2 += t * t
            dp = math.sqrt(dp2)
            if use_neg_embed:
                dn2 = 0.0
                for c in range(K):
                    t = Eneg[c, i] - Etgt[c, j]
                    dn2 += t * t
                dn = math.sqrt(dn2)
            else:
                dn = dp
            term, qp, qn, tailf = _dyad_eval(
                y, bpos[i] + gpos_eff[j] - dp, dneg[i] + eneg_eff[j] + neg_sign * dn)
            if tailf > TAIL_TOL:
                n_noconv += 1
            if not math.isfinite(term):
                return np.inf, gS, gU, gT, gb, gg, gd, ge, i, j, n_noconv
            loss += term
            gb[i] += qp
            gg[j] += qp
            gd[i] += qn
            ge[j] += qn
            if use_neg_embed:
                if dp > _DIST_EPS:
                    cp = -qp / dp
                    for c in range(K):
                        g = cp * (Esrc[c, i] - Etgt[c, j])
                        gS[c, i] += g
                        gT[c, j] -= g
                if dn > _DIST_EPS:
                    cn = neg_sign * qn / dn
                    for c in range(K):
                        g = cn * (Eneg[c, i] - Etgt[c, j])
                        gU[c, i] += g
                        gT[c, j] -= g
            else:
                if dp > _DIST_EPS:
                    coef = (neg_sign * qn - qp) / dp
                    for c in range(K):
                        g = coef * (Esrc[c, i] - Etgt[c, j])
                        gS[c, i] += g
                        gT[c, j] -= g
    return loss, gS, gU, gT, gb, gg, gd, ge, -1, -1, n_noconv


# ---------------------------------------------------------------------------
# full-dyad Skellam sampling
# ---------------------------------------------------------------------------

@njit(cache=True, inline="always")
def _clip_log(a):
    if a < RATE_LOG_FLOOR:
        return RATE_LOG_FLOOR
    if a > SAMPLE_LOG_CEIL:
        return SAMPLE_LOG_CEIL
    return a


@njit(cache=True)
def sample_dyads_und(E, gvec, dvec, rng):
    K, N = E.shape
    cap = 1024
    ii = np.empty(cap, np.int64)
    jj = np.empty(cap, np.int64)
    yy = np.empty(cap, np.int64)
    cnt = 0
    for i in range(N):
        for j in range(i + 1, N):
            d2 = 0.0
            for c in range(K):
                t = E[c, i] - E[c, j]
                d2 += t * t
            d = math.sqrt(d2)
            lpos = math.exp(_clip_log(gvec[i] + gvec[j] - d))
            lneg = math.exp(_clip_log(dvec[i] + dvec[j] + d))
            y = _poisson_one(lpos, rng) - _poisson_one(lneg, rng)
            if y != 0:
                if cnt == cap:
                    cap *= 2
                    ii = _grow(ii, cap, cnt)
                    jj = _grow(jj, cap, cnt)
                    yy = _grow(yy, cap, cnt)
                ii[cnt] = i
                jj[cnt] = j
                yy[cnt] = y
                cnt += 1
    return ii[:cnt].copy(), jj[:cnt].copy(), yy[:cnt].copy()


@njit(cache=True, inline="always")
def _grow(arr, cap, cnt):
    out = np.empty(cap, np.int64)
    out[:cnt] = arr[:cnt]
    return out


@njit(cache=True)
def sample_dyads_dir(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff,
                     neg_sign, use_neg_embed, rng):
    K, N = Esrc.shape
    cap = 1024
    ii = np.empty(cap, np.int64)
    jj = np.empty(cap, np.int64)
    yy = np.empty(cap, np.int64)
    cnt = 0
    for i in range(N):
        for j in range(N):
            if j == i:
                continue
            dp2 = 0.0
            for c in range(K):
                t = Esrc[c, i] - Etgt[c, j]
                dp2 += t * t
            dp = math.sqrt(dp2)
            if use_neg_embed:
                dn2 = 0.0
                for c in range(K):
                    t = Eneg[c, i] - Etgt[c, j]
                    dn2 += t * t
                dn = math.sqrt(dn2)
            else:
                dn = dp
            lpos = math.exp(_clip_log(bpos[i] + gpos_eff[j] - dp))
            lneg = math.exp(_clip_log(dneg[i] + eneg_eff[j] + neg_sign * dn))
            y = _poisson_one(lpos, rng) - _poisson_one(lneg, rng)
            if y != 0:
                if cnt == cap:
                    cap *= 2
                    ii = _grow(ii, cap, cnt)
                    jj = _grow(jj, cap, cnt)
                    yy = _grow(yy, cap, cnt)
                ii[cnt] = i
                jj[cnt] = j
                yy[cnt] = y
                cnt += 1
    return ii[:cnt].copy(), jj[:cnt].copy(), yy[:cnt].copy()


@njit(cache=True)
def dyad_rate_sums(E, gvec, dvec, shift_p, shift_n):
    K, N = E.shape
    s_edge = 0.0
    s_lp = 0.0
    s_ln = 0.0
    for i in range(N):
        for j in range(i + 1, N):
            d2 = 0.0
            for c in range(K):
                t = E[c, i] - E[c, j]
                d2 += t * t
            d = math.sqrt(d2)
            lp = math.exp(_clip_log(gvec[i] + gvec[j] - d + shift_p))
            ln = math.exp(_clip_log(dvec[i] + dvec[j] + d + shift_n))
            s_edge += 1.0 - math.exp(-(lp + ln))
            s_lp += lp
            s_ln += ln
    return s_edge, s_lp, s_ln, N * (N - 1) // 2
