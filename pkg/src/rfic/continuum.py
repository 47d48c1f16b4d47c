"""Continuum random field Ising chain.

The free energy has the closed form ``x K_1(x) / K_0(x)`` with
``x = exp(-2J)``. Blocks of the continuum chain are approximated by a
Brownian path sampled on a regular grid, with spin flips restricted to grid
points; the block partition function is then a finite sum computed by
dynamic programming over (spin, number of flips).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numba import njit
from scipy import special

from ._parallel import run_tasks
from .coarsegrain import BlockBoundReport
from .disorder import rng_for

__all__ = [
    "EULER_GAMMA",
    "LOG2",
    "ASYMPTOTIC_SHIFT",
    "SHIFT_PLUS_GAMMA",
    "ContinuumEval",
    "BrownianBlock",
    "BlockZ",
    "bessel_k0",
    "bessel_k1",
    "k0_xk1_from_log",
    "continuum_F",
    "asymptotic_free_energy",
    "continuum_free_energy",
    "sample_brownian_block",
    "brownian_range_samples",
    "continuum_block_z",
    "verify_continuum_block_bounds",
    "scaling_identity_check",
    "range_tail_fit",
    "sandwich_error_terms",
    "cauchy_schwarz_check",
]

EULER_GAMMA = 0.57721566490153286061
LOG2 = 0.69314718055994530942
# F(J) = 1 / (2J + ASYMPTOTIC_SHIFT) + O(e^{-4J}), from K0(x) ~ -log(x/2) - gamma
ASYMPTOTIC_SHIFT = LOG2 - EULER_GAMMA
# the same form with +gamma; it misses F by about 2 gamma / (2J)^2
SHIFT_PLUS_GAMMA = LOG2 + EULER_GAMMA

_SERIES_MAX = 2.0


def _series(logx: float) -> tuple[float, float]:
    # ascending series with l = log(x/2) + gamma and t = x^2 / 4:
    #   K0   = sum_k t^k/(k!)^2 (H_k - l)
    #   x K1 = 1 + 2t sum_k t^k/(k!(k+1)!) (l - (H_k + H_{k+1})/2)
    ell = logx - LOG2 + EULER_GAMMA
    t = 0.25 * math.exp(2.0 * logx)
    c = 1.0
    d = 1.0
    hk = 0.0
    k0 = -ell
    s1 = ell - 0.5
    for k in range(1, 80):
        c *= t / (k * k)
        d *= t / (k * (k + 1))
        hk1 = hk + 1.0 / k
        k0 += c * (hk1 - ell)
        s1 += d * (ell - 0.5 * (hk1 + hk1 + 1.0 / (k + 1)))
        hk = hk1
        if c < 1e-18 * abs(k0) and d < 1e-18:
            break
    return k0, 1.0 + 2.0 * t * s1


def k0_xk1_from_log(logx: float) -> tuple[float, float]:
    """``(K_0(x), x K_1(x))`` for ``x = exp(logx)``.

    Below ``x = 2`` the ascending series is used, written in ``log x`` so
    that arbitrarily small ``x`` neither underflows nor overflows. Above it
    the exponentially scaled functions are used and the common factor
    ``exp(-x)`` is kept (it cancels in ratios); callers needing absolute
    values for ``x >= 2`` should use :func:`bessel_k0` and :func:`bessel_k1`.
    """
    if logx < math.log(_SERIES_MAX):
        return _series(logx)
    x = math.exp(logx)
    return float(special.k0e(x)), x * float(special.k1e(x))


def bessel_k0(x: float) -> float:
    if x <= 0:
        raise ValueError("K0 needs x > 0")
    if x < _SERIES_MAX:
        return _series(math.log(x))[0]
    return float(special.k0(x))


def bessel_k1(x: float) -> float:
    if x <= 0:
        raise ValueError("K1 needs x > 0")
    if x < _SERIES_MAX:
        return _series(math.log(x))[1] / x
    return float(special.k1(x))


def continuum_F(J: float) -> float:
    """``x K_1(x) / K_0(x)`` at ``x = exp(-2J)``; finite for every real ``J``."""
    k0, xk1 = k0_xk1_from_log(-2.0 * J)
    return xk1 / k0


def asymptotic_free_energy(J: float, shift: float = ASYMPTOTIC_SHIFT) -> float:
    return 1.0 / (2.0 * J + shift)


@dataclass(frozen=True)
class ContinuumEval:
    J: float
    x: float
    F_exact: float
    F_asym: float

    @property
    def gap(self) -> float:
        return abs(self.F_exact - self.F_asym)


def continuum_free_energy(J: float, shift: float = ASYMPTOTIC_SHIFT) -> ContinuumEval:
    if J < 0:
        raise ValueError("J must be >= 0 (use continuum_F for negative couplings)")
    return ContinuumEval(J, math.exp(-2.0 * J), continuum_F(J), asymptotic_free_energy(J, shift))


# -- Brownian blocks -----------------------------------------------------------

@dataclass(frozen=True)
class BrownianBlock:
    """Brownian path on ``G + 1`` equally spaced points of ``[0, length]``."""

    grid: np.ndarray
    length: float = 1.0

    @property
    def G(self) -> int:
        return self.grid.size - 1

    @property
    def B1(self) -> float:
        return float(self.grid[-1])

    @property
    def H(self) -> float:
        return float(self.grid.max() - self.grid.min())

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.grid)


def sample_brownian_block(G: int, seed: int, stream: int = 0, length: float = 1.0,
                          scale: float = 1.0) -> BrownianBlock:
    """Path of ``scale * B`` with independent ``N(0, length/G)`` increments."""
    if G < 2:
        raise ValueError("G must be >= 2")
    rng = rng_for(seed, stream)
    inc = scale * math.sqrt(length / G) * rng.standard_normal(G)
    return BrownianBlock(np.concatenate(([0.0], np.cumsum(inc))), length)


def _range_task(task):
    n, G, seed, stream = task
    rng = rng_for(seed, stream)
    inc = rng.standard_normal((n, G)) / math.sqrt(G)
    path = np.cumsum(inc, axis=1)
    hi = np.maximum(path.max(axis=1), 0.0)
    lo = np.minimum(path.min(axis=1), 0.0)
    return path[:, -1], hi - lo


def brownian_range_samples(n: int, G: int, seed: int, workers: int | None = None):
    """``(B_1, H)`` for ``n`` independent grid paths on ``[0, 1]``."""
    rows = max(1, (1 << 21) // G)
    tasks = [(min(rows, n - k), G, seed, i) for i, k in enumerate(range(0, n, rows))]
    res = run_tasks(_range_task, tasks, workers)
    return np.concatenate([r[0] for r in res]), np.concatenate([r[1] for r in res])


@njit(cache=True, nogil=True)
def _flip_count_dp(inc, a, jmax, cell):
    # C[s, j]: sum over flip placements with j flips ending in spin s of
    # prod (cell^n / n!) exp(sum s_k inc_k), kept as mantissa * exp(lognorm)
    C = np.zeros((2, jmax + 1))
    C[a, 0] = 1.0
    poiss = np.empty(jmax + 1)
    poiss[0] = 1.0
    for n in range(1, jmax + 1):
        poiss[n] = poiss[n - 1] * cell / n
    lognorm = 0.0
    new = np.empty((2, jmax + 1))
    for k in range(inc.shape[0]):
        for s in range(2):
            w = math.exp(inc[k] if s == 0 else -inc[k])
            for j in range(jmax + 1):
                acc = 0.0
                for n in range(j + 1):
                    src = s if n % 2 == 0 else 1 - s
                    acc += C[src, j - n] * poiss[n]
                new[s, j] = acc * w
        top = 0.0
        for s in range(2):
            for j in range(jmax + 1):
                if new[s, j] > top:
                    top = new[s, j]
        for s in range(2):
            for j in range(jmax + 1):
                C[s, j] = new[s, j] / top
        lognorm += math.log(top)
    return C, lognorm


@dataclass(frozen=True)
class BlockZ:
    """Grid block partition function with its jump-count truncation."""

    value: float
    log_value: float
    terms: np.ndarray        # x^j C_j, the contribution of exactly j flips
    truncation_bound: float  # upper bound on the omitted j > jmax terms


def continuum_block_z(block: BrownianBlock, J: float, a: int = 1, b: int = 1, jmax: int = 6) -> BlockZ:
    """Continuum block partition function on a grid path, truncated at ``jmax`` flips.

    Flip times live on grid points, the spin is constant on each grid cell,
    and the flip counts per cell are Poisson with mean ``x * cell``; the
    ``exp(length * x)`` prefactor cancels the Poisson normalisation, so
    ``Z = sum_j x^j C_j`` where ``C_j`` sums ``prod cell^n/n! exp(int s dB)``
    over placements of ``j`` flips.
    """
    if a not in (1, -1) or b not in (1, -1):
        raise ValueError("boundary spins must be +1 or -1")
    need = 1 if a != b else 0
    if jmax < max(need, 0):
        raise ValueError(f"jmax={jmax} excludes every trajectory with boundary ({a}, {b})")
    x = math.exp(-2.0 * J)
    inc = np.ascontiguousarray(block.increments)
    C, lognorm = _flip_count_dp(inc, 0 if a == 1 else 1, int(jmax), block.length / block.G)
    row = C[0 if b == 1 else 1]
    terms = row * x ** np.arange(jmax + 1) * math.exp(lognorm)
    total = float(terms.sum())
    with np.errstate(divide="ignore"):
        log_terms = np.log(row) - 2.0 * J * np.arange(jmax + 1)
    log_total = float(special.logsumexp(log_terms)) + lognorm
    # j flips leave at most ceil(j/2) segments against b, each gaining <= 2H,
    # so the j-flip term is <= e^{b B1 + H} (x len e^H)^j / j!
    y = x * block.length * math.exp(block.H)
    m = jmax + 1
    tail = 0.0 if y == 0 else math.exp(b * block.B1 + block.H + m * math.log(y) - math.lgamma(m + 1) + y)
    return BlockZ(total, log_total, terms, tail)


def verify_continuum_block_bounds(block: BrownianBlock, J: float, M: float, a: int = 1, b: int = 1,
                                  jmax: int = 6) -> list[BlockBoundReport]:
    """Two-sided comparison of a unit continuum block with the discrete weight.

    ``lower``: log Z >= -2(J+M) 1{a!=b} + b B_1 - 2(H-M)_+
    ``upper``: log Z <= -2(J-M) 1{a!=b} + b B_1 + 2(H-M)_+ + e^{2(H-J)}
    The truncated sum is a lower bound of the full one, so ``upper`` is
    checked on the truncated value plus its tail bound.
    """
    z = continuum_block_z(block, J, a, b, jmax)
    flip = 1.0 if a != b else 0.0
    H, B1 = block.H, block.B1
    excess = max(H - M, 0.0)
    lower = -2.0 * (J + M) * flip + b * B1 - 2.0 * excess
    upper = -2.0 * (J - M) * flip + b * B1 + 2.0 * excess + math.exp(2.0 * (H - J))
    full = z.log_value
    if z.truncation_bound > 0:
        full = float(np.logaddexp(full, math.log(z.truncation_bound)))
    return [BlockBoundReport("continuum_lower", lower, z.log_value),
            BlockBoundReport("continuum_upper", full, upper)]


@dataclass(frozen=True)
class ScalingReport:
    J: float
    theta: float
    lhs: float           # theta^2 F(J + log theta)
    rhs: float           # e^{-2J} K1(x') / K0(x'), x' = e^{-2J} / theta^2
    block_max_rel_diff: float  # scaled field vs stretched block, per realisation

    @property
    def abs_diff(self) -> float:
        return abs(self.lhs - self.rhs)

    @property
    def passed(self) -> bool:
        return self.abs_diff <= 1e-12 * max(1.0, abs(self.lhs)) and self.block_max_rel_diff <= 1e-10


def scaling_identity_check(J: float, theta: float, G: int = 256, seeds: Sequence[int] = (0, 1, 2),
                           jmax: int = 6) -> ScalingReport:
    """Brownian/Poisson scaling: field ``theta B`` at ``J`` against ``B`` on
    ``[0, theta^2]`` at ``J + log theta``.

    The closed form is checked through two independent Bessel evaluations.
    Per seed, the grid block with field ``theta B`` on ``[0, 1]`` is compared
    with the block of ``B`` on ``[0, theta^2]`` at coupling ``J + log theta``
    built from the same normals; the two are equal realisation by
    realisation.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    lhs = theta**2 * continuum_F(J + math.log(theta))
    xs = math.exp(-2.0 * J) / theta**2
    rhs = math.exp(-2.0 * J) * float(special.k1e(xs) / special.k0e(xs))
    worst = 0.0
    for s in seeds:
        scaled = sample_brownian_block(G, s, scale=theta)
        stretched = sample_brownian_block(G, s, length=theta**2)
        for a in (1, -1):
            for b in (1, -1):
                z1 = continuum_block_z(scaled, J, a, b, jmax).log_value
                z2 = continuum_block_z(stretched, J + math.log(theta), a, b, jmax).log_value
                worst = max(worst, abs(z1 - z2) / max(1.0, abs(z1)))
    return ScalingReport(J, theta, lhs, rhs, worst)


# -- Monte Carlo over the range H ----------------------------------------------

def _mean_se(v):
    v = np.asarray(v, dtype=float)
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def range_tail_fit(H, lambdas: Sequence[float] = (2.0, 3.0, 4.0)):
    """Empirical ``P[H >= lam]`` and the constant ``C`` in ``C e^{-lam^2/8}``.

    Returns ``(rows, C)`` with rows ``(lam, p, se, p e^{lam^2/8})`` and ``C``
    the largest ratio.
    """
    H = np.asarray(H)
    rows = []
    for lam in lambdas:
        p, se = _mean_se(H >= lam)
        rows.append((lam, p, se, p * math.exp(lam * lam / 8)))
    return rows, max(r[3] for r in rows)


@dataclass(frozen=True)
class SandwichTerms:
    """Error terms of the continuum/discrete free-energy sandwich."""

    J: float
    M: float
    upper: float      # E[2 (H-M)_+]
    upper_se: float
    lower: float      # e^{-2J} + E[2 (H-M)_+ + e^{2(H-M-J)}]
    lower_se: float


def sandwich_error_terms(H, J: float, M: float) -> SandwichTerms:
    H = np.asarray(H)
    ex = 2.0 * np.maximum(H - M, 0.0)
    up, up_se = _mean_se(ex)
    lo, lo_se = _mean_se(ex + np.exp(2.0 * (H - M - J)))
    return SandwichTerms(J, M, up, up_se, math.exp(-2.0 * J) + lo, lo_se)


def cauchy_schwarz_check(H, M: float):
    """``(E[(H-M)_+], sqrt(E[H^2] P[H > M]))`` with the standard error of the first."""
    H = np.asarray(H)
    e, se = _mean_se(np.maximum(H - M, 0.0))
    return e, se, math.sqrt(float(np.mean(H * H)) * float(np.mean(H > M)))
