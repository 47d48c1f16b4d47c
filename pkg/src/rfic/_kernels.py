"""Compiled inner loops for the log-domain 2x2 transfer-matrix recursion.

State layout (one row per coupling value): ``logv[:, 0]`` is spin +1,
``logv[:, 1]`` spin -1. ``grad`` and ``curv`` hold the first two cumulants
of ``d/dJ log v`` per end spin, i.e. ``d log v / dJ`` and
``d^2 log v / dJ^2``. Carrying cumulants instead of raw derivatives keeps the
second derivative free of the ``O(N^2)`` cancellation.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _lse2(a, b):
    # log(exp(a) + exp(b)) and the weight exp(b) / (exp(a) + exp(b))
    if a == -np.inf and b == -np.inf:
        return -np.inf, 0.0
    if a >= b:
        e = math.exp(b - a)
        return a + math.log1p(e), e / (1.0 + e)
    e = math.exp(a - b)
    return b + math.log1p(e), 1.0 / (1.0 + e)


@njit(cache=True, nogil=True)
def advance(h, Js, logv, lognorm, grad, curv, order):
    """Multiply the state rows by ``M(h_1) ... M(h_n)`` in place.

    ``M(h)[c, b] = exp(-2J 1{c != b} + b h)``; after every site the larger
    log entry is moved into ``lognorm``.
    """
    n = h.shape[0]
    for j in range(Js.shape[0]):
        twoJ = 2.0 * Js[j]
        up = logv[j, 0]
        um = logv[j, 1]
        ln = lognorm[j]
        gp = grad[j, 0]
        gm = grad[j, 1]
        kp = curv[j, 0]
        km = curv[j, 1]
        for i in range(n):
            x = h[i]
            lp, wp = _lse2(up, um - twoJ)
            lm, wm = _lse2(um, up - twoJ)
            if order >= 1:
                # flip moves contribute -2 to d/dJ of the log weight
                ngp = gp + wp * (gm - 2.0 - gp)
                ngm = gm + wm * (gp - 2.0 - gm)
                if order >= 2:
                    d0 = gp - ngp
                    d1 = gm - 2.0 - ngp
                    nkp = (1.0 - wp) * (kp + d0 * d0) + wp * (km + d1 * d1)
                    d0 = gm - ngm
                    d1 = gp - 2.0 - ngm
                    nkm = (1.0 - wm) * (km + d0 * d0) + wm * (kp + d1 * d1)
                    kp = nkp
                    km = nkm
                gp = ngp
                gm = ngm
            lp = lp + x
            lm = lm - x
            top = lp if lp >= lm else lm
            ln += top
            up = lp - top
            um = lm - top
        logv[j, 0] = up
        logv[j, 1] = um
        lognorm[j] = ln
        grad[j, 0] = gp
        grad[j, 1] = gm
        curv[j, 0] = kp
        curv[j, 1] = km


@njit(cache=True, nogil=True)
def log_transfer(h, J):
    """All four ``log Z^{a,b}`` of the chain ``h`` as a 2x2 array."""
    out = np.empty((2, 2))
    twoJ = 2.0 * J
    for a in range(2):
        up = 0.0 if a == 0 else -np.inf
        um = -np.inf if a == 0 else 0.0
        ln = 0.0
        for i in range(h.shape[0]):
            x = h[i]
            lp, _ = _lse2(up, um - twoJ)
            lm, _ = _lse2(um, up - twoJ)
            lp += x
            lm -= x
            top = lp if lp >= lm else lm
            ln += top
            up = lp - top
            um = lm - top
        out[a, 0] = ln + up
        out[a, 1] = ln + um
    return out


@njit(cache=True, nogil=True)
def prefix_range(h):
    """``max_k S_k - min_k S_k`` over partial sums ``S_0 = 0, ..., S_n``."""
    s = 0.0
    hi = 0.0
    lo = 0.0
    for i in range(h.shape[0]):
        s += h[i]
        if s > hi:
            hi = s
        elif s < lo:
            lo = s
    return hi - lo


@njit(cache=True, nogil=True)
def prefix_range_rows(x):
    out = np.empty(x.shape[0])
    for r in range(x.shape[0]):
        out[r] = prefix_range(x[r])
    return out
