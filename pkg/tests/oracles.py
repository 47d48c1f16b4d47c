"""Independent reference implementations used only by the tests.

None of these share code with the package: partition functions are
enumerated configuration by configuration, integrals go through adaptive
quadrature.
"""

from __future__ import annotations

import itertools
import json
import math
from pathlib import Path

import mpmath
import numpy as np
from scipy import integrate, special, stats

DATA = Path(__file__).parent / "data"


def _lse(values):
    m = max(values)
    return m + math.log(math.fsum(math.exp(v - m) for v in values))


def brute_log_z(h, J, a=1, b=1):
    """log of the sum over all (sigma_0, ..., sigma_N) with sigma_0 = a, sigma_N = b.

    Every one of the 2^(N+1) spin sequences is visited; those with the wrong
    boundary spins are dropped.
    """
    N = len(h)
    energies = []
    for sig in itertools.product((1, -1), repeat=N + 1):
        if sig[0] != a or sig[-1] != b:
            continue
        e = 0.0
        for n in range(1, N + 1):
            e += -2.0 * J * (sig[n] != sig[n - 1]) + sig[n] * h[n - 1]
        energies.append(e)
    return _lse(energies)


def brute_log_z_batch(H, J, a=1, b=1):
    """Row-wise brute-force log Z for a batch of chains ``H`` of shape (R, N).

    Enumerates the 2^(N-1) interior configurations as a matrix, so a batch
    of short chains costs one matrix product.
    """
    H = np.asarray(H, dtype=float)
    N = H.shape[1]
    mid = np.array(list(itertools.product((1, -1), repeat=N - 1)), dtype=float).reshape(-1, N - 1)
    S = np.hstack([np.full((mid.shape[0], 1), a), mid, np.full((mid.shape[0], 1), b)])
    flips = (S[:, 1:] != S[:, :-1]).sum(axis=1)
    E = H @ S[:, 1:].T - 2.0 * J * flips[None, :]
    return special.logsumexp(E, axis=1)


def brute_flip_moments(h, J, a=1, b=1):
    """Gibbs mean and variance of the number of flips, by enumeration."""
    N = len(h)
    ws, ks = [], []
    for sig in itertools.product((1, -1), repeat=N + 1):
        if sig[0] != a or sig[-1] != b:
            continue
        k = sum(sig[n] != sig[n - 1] for n in range(1, N + 1))
        e = sum(sig[n] * h[n - 1] for n in range(1, N + 1)) - 2.0 * J * k
        ws.append(e)
        ks.append(k)
    m = max(ws)
    p = [math.exp(w - m) for w in ws]
    Z = math.fsum(p)
    mean = math.fsum(pi * k for pi, k in zip(p, ks)) / Z
    var = math.fsum(pi * (k - mean) ** 2 for pi, k in zip(p, ks)) / Z
    return mean, var


def brute_window_max(h):
    """max over 1 <= n <= m <= L of |h_n + ... + h_m|, O(L^2)."""
    best = 0.0
    for n in range(len(h)):
        s = 0.0
        for m in range(n, len(h)):
            s += h[m]
            best = max(best, abs(s))
    return best


def quantile_w1(qf, qg):
    """Integral over (0, 1) of |F^-1(u) - G^-1(u)| by adaptive quadrature."""
    val, _ = integrate.quad(lambda u: abs(qf(u) - qg(u)), 0.0, 1.0, limit=400)
    return val


def gaussian_log2cosh_mean(variance=1.0):
    """E log(2 cosh h) for h ~ N(0, variance), the J = 0 free energy."""
    s = math.sqrt(variance)
    f = lambda x: (abs(x) + math.log1p(math.exp(-2 * abs(x)))) * stats.norm.pdf(x, scale=s)  # noqa: E731
    val, _ = integrate.quad(f, -40 * s, 40 * s, limit=400)
    return val


def gaussian_quantile(variance):
    s = math.sqrt(variance)
    return lambda u: s * special.ndtri(u)


def bessel_reference():
    return json.loads((DATA / "bessel_reference.json").read_text())


def fixtures():
    return json.loads((DATA / "fixtures.json").read_text())


def fd_flip_density(h, J, a=1, b=1, step=1e-8, dps=40):
    """``-(1/2N) d/dJ log Z`` by a central difference carried out in ``dps`` digits.

    Enumeration groups configurations by flip count k, so
    ``Z(J) = sum_k e^{-2Jk} A_k`` is evaluated exactly at ``J +- step``.
    """
    N = len(h)
    with mpmath.workdps(dps):
        A = [mpmath.mpf(0)] * (N + 1)
        for sig in itertools.product((1, -1), repeat=N + 1):
            if sig[0] != a or sig[-1] != b:
                continue
            k = sum(sig[n] != sig[n - 1] for n in range(1, N + 1))
            A[k] += mpmath.exp(mpmath.fsum(sig[n] * mpmath.mpf(h[n - 1]) for n in range(1, N + 1)))

        def logz(j):
            return mpmath.log(mpmath.fsum(A[k] * mpmath.exp(-2 * j * k) for k in range(N + 1)))

        d = mpmath.mpf(step)
        j = mpmath.mpf(J)
        return float(-(logz(j + d) - logz(j - d)) / (2 * d) / (2 * N))
