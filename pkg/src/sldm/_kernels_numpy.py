"""Pure-numpy kernel implementations (reference/fallback backend).

Every function here has an ``@njit`` twin in ``sldm._kernels_numba`` with the
same name and signature. The numpy versions are vectorized over dyad chunks so
they stay usable (if slower) on graphs of a few thousand nodes.

Conventions shared by both backends:

* Latent positions are column matrices ``E`` of shape (K, N); per-node effects
  are length-N vectors.
* A "block" is a sorted array of node indices; the dyad set is every unordered
  pair (undirected) or ordered pair (directed) within it.
* Edge weights are looked up from CSR arrays (indptr, indices, weights); the
  CSR of an undirected graph must contain both directions.
* Log-rates are floored at ``RATE_LOG_FLOOR`` before use and no gradient flows
  through a floored rate, so analytic gradients match finite differences of
  the implemented loss.
"""

import numpy as np
from scipy import sparse
from scipy.special import gammaln

N_TERMS = 50
RATE_LOG_FLOOR = float(np.log(1e-30))
SAMPLE_LOG_CEIL = float(np.log(1e12))
TAIL_TOL = 1e-12
_DIST_EPS = 1e-12
_CHUNK_DYADS = 200_000


# ---------------------------------------------------------------------------
# modified Bessel function of the first kind, 50-term truncated series
# ---------------------------------------------------------------------------

def log_bessel_i_arr(orders, x):
    """Log of the 50-term series for I_nu(x) over 1-D arrays.

    Computed as a log-sum-exp over the log-terms
    ``(nu + 2k) log(x/2) - lgamma(k+1) - lgamma(nu+k+1)``, k = 0..49.

    Returns ``(log_value, tail_fraction)`` where ``tail_fraction`` is the
    relative contribution of the last retained term; values above ``TAIL_TOL``
    mean the truncated series has not converged.
    """
    nu = np.asarray(orders, np.int64).ravel()
    xv = np.asarray(x, np.float64).ravel()
    out = np.empty(nu.size, np.float64)
    tail = np.zeros(nu.size, np.float64)

    zero = xv == 0.0
    if zero.any():
        out[zero] = np.where(nu[zero] == 0, 0.0, -np.inf)
    pos = np.nonzero(~zero)[0]
    if pos.size:
        nup = nu[pos].astype(np.float64)
        L = np.log(0.5 * xv[pos])
        k = np.arange(N_TERMS, dtype=np.float64)[:, None]
        logt = (nup[None, :] + 2.0 * k) * L[None, :]
        logt -= gammaln(k + 1.0) + gammaln(nup[None, :] + k + 1.0)
        m = logt.max(axis=0)
        s = np.exp(logt - m[None, :]).sum(axis=0)
        val = m + np.log(s)
        out[pos] = val
        tail[pos] = np.exp(logt[-1] - val)
    return out, tail


def bessel_ratio_arr(orders, x):
    """I_{nu+1}(x)/I_nu(x) from the same 50-term truncations, clamped to [0, 1]."""
    nu = np.asarray(orders, np.int64).ravel()
    la, _ = log_bessel_i_arr(nu, x)
    return _ratio_given(nu, np.asarray(x, np.float64).ravel(), la)


def _ratio_given(nu, x, log_i_nu):
    lb, _ = log_bessel_i_arr(np.asarray(nu, np.int64) + 1, x)
    with np.errstate(invalid="ignore"):
        r = np.exp(lb - log_i_nu)
    r = np.where(np.asarray(x, np.float64) == 0.0, 0.0, r)
    return np.clip(np.nan_to_num(r, nan=0.0), 0.0, 1.0)


# ---------------------------------------------------------------------------
# Poisson sampling: Knuth inversion below rate 30, transformed rejection above
# ---------------------------------------------------------------------------

def poisson_sample_arr(lam, rng):
    """Poisson draws for a 1-D rate array using a caller-supplied Generator."""
    flat = np.asarray(lam, np.float64).ravel()
    out = np.zeros(flat.size, np.int64)

    small = np.nonzero(flat < 30.0)[0]
    if small.size:
        L = np.exp(-flat[small])
        k = np.zeros(small.size, np.int64)
        p = np.ones(small.size)
        active = np.arange(small.size)
        while active.size:
            p[active] *= rng.random(active.size)
            above = p[active] > L[active]
            k[active[above]] += 1
            active = active[above]
        out[small] = k

    big = np.nonzero(flat >= 30.0)[0]
    if big.size:
        l = flat[big]
        b = 0.931 + 2.53 * np.sqrt(l)
        a = -0.059 + 0.02483 * b
        inv_alpha = 1.1239 + 1.1328 / (b - 3.4)
        vr = 0.9277 - 3.6224 / (b - 2.0)
        res = np.zeros(big.size, np.int64)
        pending = np.arange(big.size)
        while pending.size:
            u = rng.random(pending.size) - 0.5
            v = rng.random(pending.size)
            us = 0.5 - np.abs(u)
            kf = np.floor((2.0 * a[pending] / us + b[pending]) * u + l[pending] + 0.43)
            quick = (us >= 0.07) & (v <= vr[pending])
            valid = (kf >= 0) & ~((us < 0.013) & (v > us))
            with np.errstate(divide="ignore", invalid="ignore"):
                lhs = np.log(v) + np.log(inv_alpha[pending]) - np.log(a[pending] / (us * us) + b[pending])
                rhs = kf * np.log(l[pending]) - l[pending] - gammaln(kf + 1.0)
            accept = quick | (valid & (lhs <= rhs))
            res[pending[accept]] = kf[accept].astype(np.int64)
            pending = pending[~accept]
        out[big] = res

    return out


# ---------------------------------------------------------------------------
# dyad iteration helpers
# ---------------------------------------------------------------------------

def _row_batches(n_rows, row_len, target):
    step = max(1, int(target // max(1, row_len)))
    for a0 in range(0, n_rows, step):
        yield a0, min(a0 + step, n_rows)


def _und_pairs(a0, a1, B):
    lens = B - 1 - np.arange(a0, a1)
    ia = np.repeat(np.arange(a0, a1), lens)
    ja = np.concatenate([np.arange(a + 1, B) for a in range(a0, a1)]) if a1 > a0 else np.empty(0, np.int64)
    return ia, ja


def _dir_pairs(a0, a1, B):
    ia = np.repeat(np.arange(a0, a1), B - 1)
    cols = np.arange(B)
    ja = np.concatenate([np.concatenate((cols[:a], cols[a + 1:])) for a in range(a0, a1)]) if a1 > a0 else np.empty(0, np.int64)
    return ia, ja


def _block_csr(members, indptr, indices, weights):
    n = indptr.size - 1
    full = sparse.csr_matrix((weights, indices, indptr), shape=(n, n))
    return full[members][:, members].tocsr()


def _dyad_core(y, apos, aneg, want_grad):
    lapos = np.maximum(apos, RATE_LOG_FLOOR)
    laneg = np.maximum(aneg, RATE_LOG_FLOOR)
    lpos = np.exp(lapos)
    lneg = np.exp(laneg)
    xarg = 2.0 * np.exp(0.5 * (lapos + laneg))
    nu = np.abs(y).astype(np.int64)
    log_i, tailf = log_bessel_i_arr(nu, xarg)
    terms = lpos + lneg - 0.5 * y * (lapos - laneg) - log_i
    n_noconv = int((tailf > TAIL_TOL).sum())
    if not want_grad:
        return terms, None, None, n_noconv
    half_xr = 0.5 * xarg * _ratio_given(nu, xarg, log_i)
    qpos = np.where(apos > RATE_LOG_FLOOR, lpos - 0.5 * (y + nu) - half_xr, 0.0)
    qneg = np.where(aneg > RATE_LOG_FLOOR, lneg + 0.5 * (y - nu) - half_xr, 0.0)
    return terms, qpos, qneg, n_noconv


def _first_bad(terms, gi, gj):
    bad = np.nonzero(~np.isfinite(terms))[0]
    if bad.size:
        k = bad[0]
        return int(gi[k]), int(gj[k])
    return -1, -1


# ---------------------------------------------------------------------------
# block loss / gradient, undirected (shared distance, symmetric effects)
# ---------------------------------------------------------------------------

def _und_block(E, epos, eneg, members, indptr, indices, weights, want_grad):
    K, N = E.shape
    B = members.size
    loss = 0.0
    n_noconv = 0
    gE_t = np.zeros((N, K)) if want_grad else None
    gpos = np.zeros(N) if want_grad else None
    gneg = np.zeros(N) if want_grad else None
    sub = _block_csr(members, indptr, indices, weights) if B else None

    for a0, a1 in _row_batches(B, B, _CHUNK_DYADS):
        ia, ja = _und_pairs(a0, a1, B)
        if not ia.size:
            continue
        yd = np.asarray(sub[a0:a1].todense())
        y = yd[ia - a0, ja]
        gi = members[ia]
        gj = members[ja]
        v = E[:, gi] - E[:, gj]
        d = np.sqrt((v * v).sum(axis=0))
        apos = epos[gi] + epos[gj] - d
        aneg = eneg[gi] + eneg[gj] + d
        terms, qpos, qneg, bad_cnt = _dyad_core(y, apos, aneg, want_grad)
        n_noconv += bad_cnt
        if not np.isfinite(terms).all():
            bi, bj = _first_bad(terms, gi, gj)
            return np.inf, gE_t, gpos, gneg, bi, bj, n_noconv
        loss += float(terms.sum())
        if want_grad:
            np.add.at(gpos, gi, qpos)
            np.add.at(gpos, gj, qpos)
            np.add.at(gneg, gi, qneg)
            np.add.at(gneg, gj, qneg)
            w = qneg - qpos
            coef = np.where(d > _DIST_EPS, w / np.maximum(d, _DIST_EPS), 0.0)
            gv = (v * coef).T
            np.add.at(gE_t, gi, gv)
            np.add.at(gE_t, gj, -gv)
    return loss, gE_t, gpos, gneg, -1, -1, n_noconv


def und_loss(E, epos, eneg, members, indptr, indices, weights):
    loss, _, _, _, bi, bj, nc = _und_block(E, epos, eneg, members, indptr, indices, weights, False)
    return loss, bi, bj, nc


def und_loss_grad(E, epos, eneg, members, indptr, indices, weights):
    loss, gE_t, gpos, gneg, bi, bj, nc = _und_block(
        E, epos, eneg, members, indptr, indices, weights, True)
    return loss, np.ascontiguousarray(gE_t.T), gpos, gneg, bi, bj, nc


# ---------------------------------------------------------------------------
# block loss / gradient, directed (sender/receiver effects, optional separate
# embedding and sign for the negative rate)
# ---------------------------------------------------------------------------

def _dir_block(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
               use_neg_embed, members, indptr, indices, weights, want_grad):
    K, N = Esrc.shape
    B = members.size
    loss = 0.0
    n_noconv = 0
    gS_t = np.zeros((N, K)) if want_grad else None
    gU_t = np.zeros((N, K)) if want_grad else None
    gT_t = np.zeros((N, K)) if want_grad else None
    gb = np.zeros(N) if want_grad else None
    gg = np.zeros(N) if want_grad else None
    gd = np.zeros(N) if want_grad else None
    ge = np.zeros(N) if want_grad else None
    sub = _block_csr(members, indptr, indices, weights) if B else None

    for a0, a1 in _row_batches(B, B, _CHUNK_DYADS):
        ia, ja = _dir_pairs(a0, a1, B)
        if not ia.size:
            continue
        yd = np.asarray(sub[a0:a1].todense())
        y = yd[ia - a0, ja]
        gi = members[ia]
        gj = members[ja]
        vp = Esrc[:, gi] - Etgt[:, gj]
        dp = np.sqrt((vp * vp).sum(axis=0))
        if use_neg_embed:
            vn = Eneg[:, gi] - Etgt[:, gj]
            dn = np.sqrt((vn * vn).sum(axis=0))
        else:
            vn, dn = vp, dp
        apos = bpos[gi] + gpos_eff[gj] - dp
        aneg = dneg[gi] + eneg_eff[gj] + neg_sign * dn
        terms, qp, qn, bad_cnt = _dyad_core(y, apos, aneg, want_grad)
        n_noconv += bad_cnt
        if not np.isfinite(terms).all():
            bi, bj = _first_bad(terms, gi, gj)
            return loss, gS_t, gU_t, gT_t, gb, gg, gd, ge, bi, bj, n_noconv, True
        loss += float(terms.sum())
        if want_grad:
            np.add.at(gb, gi, qp)
            np.add.at(gg, gj, qp)
            np.add.at(gd, gi, qn)
            np.add.at(ge, gj, qn)
            cp = np.where(dp > _DIST_EPS, -qp / np.maximum(dp, _DIST_EPS), 0.0)
            cn = np.where(dn > _DIST_EPS, neg_sign * qn / np.maximum(dn, _DIST_EPS), 0.0)
            if use_neg_embed:
                gvp = (vp * cp).T
                gvn = (vn * cn).T
                np.add.at(gS_t, gi, gvp)
                np.add.at(gU_t, gi, gvn)
                np.add.at(gT_t, gj, -(gvp + gvn))
            else:
                gv = (vp * (cp + cn)).T
                np.add.at(gS_t, gi, gv)
                np.add.at(gT_t, gj, -gv)
    return loss, gS_t, gU_t, gT_t, gb, gg, gd, ge, -1, -1, n_noconv, False


def dir_loss(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
             use_neg_embed, members, indptr, indices, weights):
    res = _dir_block(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
                     use_neg_embed, members, indptr, indices, weights, False)
    loss, bi, bj, nc, failed = res[0], res[8], res[9], res[10], res[11]
    return (np.inf if failed else loss), bi, bj, nc


def dir_loss_grad(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
                  use_neg_embed, members, indptr, indices, weights):
    (loss, gS_t, gU_t, gT_t, gb, gg, gd, ge, bi, bj, nc, failed) = _dir_block(
        Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff, neg_sign,
        use_neg_embed, members, indptr, indices, weights, True)
    if failed:
        loss = np.inf
    return (loss, np.ascontiguousarray(gS_t.T), np.ascontiguousarray(gU_t.T),
            np.ascontiguousarray(gT_t.T), gb, gg, gd, ge, bi, bj, nc)


# ---------------------------------------------------------------------------
# full-dyad Skellam sampling (network generation)
# ---------------------------------------------------------------------------

def _clip_log(a):
    return np.clip(a, RATE_LOG_FLOOR, SAMPLE_LOG_CEIL)


def sample_dyads_und(E, gvec, dvec, rng):
    """Sample y_ij over all unordered dyads; returns (i, j, y) for y != 0."""
    K, N = E.shape
    out_i, out_j, out_y = [], [], []
    for a0, a1 in _row_batches(N, N, _CHUNK_DYADS):
        ia, ja = _und_pairs(a0, a1, N)
        if not ia.size:
            continue
        v = E[:, ia] - E[:, ja]
        d = np.sqrt((v * v).sum(axis=0))
        lpos = np.exp(_clip_log(gvec[ia] + gvec[ja] - d))
        lneg = np.exp(_clip_log(dvec[ia] + dvec[ja] + d))
        y = poisson_sample_arr(lpos, rng) - poisson_sample_arr(lneg, rng)
        nz = y != 0
        out_i.append(ia[nz])
        out_j.append(ja[nz])
        out_y.append(y[nz])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_y)


def sample_dyads_dir(Esrc, Eneg, Etgt, bpos, gpos_eff, dneg, eneg_eff,
                     neg_sign, use_neg_embed, rng):
    """Sample y_ij over all ordered dyads; returns (i, j, y) for y != 0."""
    K, N = Esrc.shape
    out_i, out_j, out_y = [], [], []
    for a0, a1 in _row_batches(N, N, _CHUNK_DYADS):
        ia, ja = _dir_pairs(a0, a1, N)
        if not ia.size:
            continue
        vp = Esrc[:, ia] - Etgt[:, ja]
        dp = np.sqrt((vp * vp).sum(axis=0))
        if use_neg_embed:
            vn = Eneg[:, ia] - Etgt[:, ja]
            dn = np.sqrt((vn * vn).sum(axis=0))
        else:
            dn = dp
        lpos = np.exp(_clip_log(bpos[ia] + gpos_eff[ja] - dp))
        lneg = np.exp(_clip_log(dneg[ia] + eneg_eff[ja] + neg_sign * dn))
        y = poisson_sample_arr(lpos, rng) - poisson_sample_arr(lneg, rng)
        nz = y != 0
        out_i.append(ia[nz])
        out_j.append(ja[nz])
        out_y.append(y[nz])
    if not out_i:
        return np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0, np.int64)
    return np.concatenate(out_i), np.concatenate(out_j), np.concatenate(out_y)


def dyad_rate_sums(E, gvec, dvec, shift_p, shift_n):
    """Sums over all unordered dyads of edge probability and both rates.

    Rates are shifted by ``shift_p``/``shift_n`` in log space (calibration
    knobs). Returns (sum of 1 - exp(-(lp+ln)), sum lp, sum ln, n_dyads).
    """
    K, N = E.shape
    s_edge = s_lp = s_ln = 0.0
    n_dyads = N * (N - 1) // 2
    for a0, a1 in _row_batches(N, N, _CHUNK_DYADS):
        ia, ja = _und_pairs(a0, a1, N)
        if not ia.size:
            continue
        v = E[:, ia] - E[:, ja]
        d = np.sqrt((v * v).sum(axis=0))
        lp = np.exp(_clip_log(gvec[ia] + gvec[ja] - d + shift_p))
        ln = np.exp(_clip_log(dvec[ia] + dvec[ja] + d + shift_n))
        s_edge += float((1.0 - np.exp(-(lp + ln))).sum())
        s_lp += float(lp.sum())
        s_ln += float(ln.sum())
    return s_edge, s_lp, s_ln, n_dyads
