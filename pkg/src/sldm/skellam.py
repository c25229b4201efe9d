"""Skellam distribution primitives on top of the kernel backend.

The Skellam pmf for an integer weight y with rates (lp, ln) is

    exp(-(lp + ln)) * (lp/ln)^(y/2) * I_|y|(2 sqrt(lp ln)),

with ``I`` the modified Bessel function of the first kind, evaluated here by
its 50-term power series entirely in log space. Sampling goes through the
stated difference of two Poisson draws.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from .backend import kernels
from .errors import SeriesTruncationWarning

TAIL_TOL = kernels.TAIL_TOL


@dataclass(frozen=True)
class SkellamRates:
    """Positive and negative Poisson rates; scalars or broadcastable arrays."""

    lambda_pos: object
    lambda_neg: object

    def __post_init__(self):
        lp = np.asarray(self.lambda_pos, np.float64)
        ln = np.asarray(self.lambda_neg, np.float64)
        for name, arr in (("lambda_pos", lp), ("lambda_neg", ln)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} must be finite")
            if np.any(arr <= 0.0):
                raise ValueError(f"{name} must be strictly positive")

    def arrays(self):
        lp, ln = np.broadcast_arrays(
            np.asarray(self.lambda_pos, np.float64),
            np.asarray(self.lambda_neg, np.float64))
        return lp, ln


def _as_order_array(order):
    o = np.asarray(order)
    if not np.issubdtype(o.dtype, np.integer):
        rounded = np.rint(o)
        if not np.array_equal(rounded, o):
            raise ValueError("Bessel order must be integral")
        o = rounded
    if np.any(o < 0):
        raise ValueError("Bessel order must be nonnegative")
    return o.astype(np.int64)


def log_bessel_i(order, x, warn_truncation=True):
    """log I_order(x) via the 50-term series; scalar in, scalar out.

    ``log_bessel_i(0, 0) == 0`` and higher orders at x = 0 return -inf. A
    ``SeriesTruncationWarning`` is emitted when the last retained term still
    contributes more than ``TAIL_TOL`` of the total, i.e. when 50 terms were
    not enough for the requested (order, x).
    """
    o = _as_order_array(order)
    xv = np.asarray(x, np.float64)
    if np.any(xv < 0.0):
        raise ValueError("Bessel argument must be nonnegative")
    ob, xb = np.broadcast_arrays(o, xv)
    vals, tails = kernels.log_bessel_i_arr(
        np.ascontiguousarray(ob.ravel()), np.ascontiguousarray(xb.ravel(), np.float64))
    if warn_truncation and np.any(tails > TAIL_TOL):
        n = int((tails > TAIL_TOL).sum())
        warnings.warn(
            f"Bessel series not converged after {kernels.N_TERMS} terms for {n} evaluation(s)",
            SeriesTruncationWarning, stacklevel=2)
    if np.isscalar(order) and np.isscalar(x):
        return float(vals[0])
    return vals.reshape(ob.shape)


def bessel_ratio(order, x):
    """I_{order+1}(x) / I_order(x) from the same truncated series, in [0, 1]."""
    o = _as_order_array(order)
    xv = np.asarray(x, np.float64)
    ob, xb = np.broadcast_arrays(o, xv)
    r = kernels.bessel_ratio_arr(
        np.ascontiguousarray(ob.ravel()), np.ascontiguousarray(xb.ravel(), np.float64))
    if np.isscalar(order) and np.isscalar(x):
        return float(r[0])
    return r.reshape(ob.shape)


def skellam_log_pmf(y, rates):
    """Log pmf of the Skellam distribution at integer weight(s) y."""
    if not isinstance(rates, SkellamRates):
        rates = SkellamRates(*rates)
    lp, ln = rates.arrays()
    yv = np.asarray(y, np.float64)
    yb, lpb, lnb = np.broadcast_arrays(yv, lp, ln)
    lap = np.log(lpb)
    lan = np.log(lnb)
    xarg = 2.0 * np.exp(0.5 * (lap + lan))
    nu = np.abs(yb).astype(np.int64)
    log_i = log_bessel_i(nu.reshape(-1), xarg.reshape(-1)).reshape(yb.shape)
    out = -(lpb + lnb) + 0.5 * yb * (lap - lan) + log_i
    if out.ndim == 0 or (np.isscalar(y) and lp.ndim == 0):
        return float(out.reshape(-1)[0]) if out.size == 1 else out
    return out


def poisson_sample(rate, rng):
    """Poisson draw(s): Knuth inversion below rate 30, transformed rejection above."""
    rv = np.asarray(rate, np.float64)
    if np.any(~np.isfinite(rv)) or np.any(rv <= 0.0):
        raise ValueError("Poisson rate must be positive and finite")
    out = kernels.poisson_sample_arr(np.ascontiguousarray(rv.reshape(-1)), rng)
    if np.isscalar(rate) or rv.ndim == 0:
        return int(out[0])
    return np.asarray(out).reshape(rv.shape)


def skellam_sample(rates, rng):
    """Skellam draw(s) as the difference of two Poisson draws."""
    if not isinstance(rates, SkellamRates):
        rates = SkellamRates(*rates)
    lp, ln = rates.arrays()
    n_pos = poisson_sample(lp if lp.ndim else float(lp), rng)
    n_neg = poisson_sample(ln if ln.ndim else float(ln), rng)
    return n_pos - n_neg
