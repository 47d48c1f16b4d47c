"""Block coarse-graining of the chain.

Block statistics, the exact block-product rewrite of the partition
function, per-realisation block inequalities, Monte Carlo tail
expectations and the J-dependent block-length/threshold schedules.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import logsumexp

from . import _kernels
from ._parallel import run_tasks
from .chain import LogChainState, _idx, log_partition_matrix
from .disorder import DisorderLaw, rng_for

__all__ = [
    "BlockStats",
    "BlockBoundReport",
    "Schedule",
    "TailEstimate",
    "block_stats",
    "block_sums",
    "max_window_sum",
    "coarse_grain_log_z",
    "verify_block_bounds",
    "tail_expectation",
    "exp_tail_bound",
    "hl_moment_curve",
    "schedule_for",
    "regime_for",
    "coupled_block_free_energy",
]

BOUND_RTOL = 1e-10


@dataclass(frozen=True)
class BlockStats:
    L: int
    h_block: float
    H_L: float
    abs_sum: float


def max_window_sum(h) -> float:
    """``max_{n <= m} |h_n + ... + h_m|`` via the range of the prefix sums."""
    h = np.ascontiguousarray(h, dtype=float)
    if h.size == 0:
        raise ValueError("empty block")
    return float(_kernels.prefix_range(h))


def block_stats(h_seq) -> BlockStats:
    h = np.asarray(h_seq, dtype=float)
    if h.size == 0:
        raise ValueError("empty block")
    return BlockStats(h.size, float(h.sum()), max_window_sum(h), float(np.abs(h).sum()))


def block_sums(h_seq, L: int) -> np.ndarray:
    """Coarse fields ``h^L_n = h_{(n-1)L+1} + ... + h_{nL}``."""
    h = np.asarray(h_seq, dtype=float)
    if L < 1:
        raise ValueError("L must be >= 1")
    if h.size % L:
        raise ValueError(f"chain length {h.size} is not a multiple of L={L}")
    return h.reshape(-1, L).sum(axis=1)


def coarse_grain_log_z(h_seq, L: int, J: float, a: int = 1, b: int = 1) -> float:
    """``log Z_{NL}`` rebuilt from block partition functions.

    Sums, over every coarse configuration ``(sigma_0 = a, sigma_1, ...,
    sigma_N = b)``, the product of the block partition functions with those
    boundary spins. Exponential in ``N``; meant for small identity checks.
    """
    h = np.asarray(h_seq, dtype=float)
    if L < 1 or h.size == 0 or h.size % L:
        raise ValueError("chain length must be a positive multiple of L")
    N = h.size // L
    blocks = [log_partition_matrix(h[n * L:(n + 1) * L], J) for n in range(N)]
    terms = []
    for mid in itertools.product((0, 1), repeat=N - 1):
        sig = (_idx(a),) + mid + (_idx(b),)
        terms.append(sum(blocks[n][sig[n], sig[n + 1]] for n in range(N)))
    return float(logsumexp(terms))


@dataclass(frozen=True)
class BlockBoundReport:
    """One inequality ``lhs <= rhs`` between log-scale quantities."""

    inequality_id: str
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        scale = max(1.0, abs(self.lhs), abs(self.rhs))
        return self.slack >= -BOUND_RTOL * scale


def verify_block_bounds(h_seq, J: float, M: float, a: int = 1, b: int = 1,
                        log_z: float | None = None) -> list[BlockBoundReport]:
    """Check the lower, upper and revisited upper bounds on one block.

    ``lower``:     Z >= exp(-2J 1{a!=b} + b h^L)
    ``upper``:     Z <= exp(-2(J - M - log(L)/2) 1{a!=b} + b h^L
                            + L (4 (H_L - M)_+ + e^{2(M-J)}))
    ``revisited``: as ``upper`` with the last term replaced by
                   (L log 2 + 2 sum|h|) 1{H_L > M} + L e^{2(M-J)}
    """
    if M < 0 or J < 0:
        raise ValueError("need J >= 0 and M >= 0")
    st = block_stats(h_seq)
    L = st.L
    if log_z is None:
        log_z = float(log_partition_matrix(h_seq, J)[_idx(a), _idx(b)])
    flip = 1.0 if a != b else 0.0
    field = b * st.h_block
    lower = -2.0 * J * flip + field
    base = -2.0 * (J - M - 0.5 * math.log(L)) * flip + field
    cost = math.exp(2.0 * (M - J))
    upper = base + L * (4.0 * max(st.H_L - M, 0.0) + cost)
    excess = (L * math.log(2.0) + 2.0 * st.abs_sum) if st.H_L > M else 0.0
    revisited = base + excess + L * cost
    return [
        BlockBoundReport("lower", lower, log_z),
        BlockBoundReport("upper", log_z, upper),
        BlockBoundReport("revisited", log_z, revisited),
    ]


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo means (with standard errors) of block tail functionals."""

    L: int
    M: float
    n: int
    excess: float            # E[(H_L - M)_+]
    excess_se: float
    exceed_prob: float       # P[H_L > M]
    exceed_prob_se: float
    revisited: float         # E[(log 2 + (2/L) sum|h|) 1{H_L > M}]
    revisited_se: float


def _tail_task(task):
    law, L, M, n, seed, stream = task
    rng = rng_for(seed, stream)
    x = law.draw(rng, n * L).reshape(n, L)
    H = _kernels.prefix_range_rows(x)
    hit = H > M
    ex = np.maximum(H - M, 0.0)
    rev = (math.log(2.0) + 2.0 / L * np.abs(x).sum(axis=1)) * hit
    return ex, hit.astype(float), rev, H


def _batches(n, L):
    size = max(1, min(n, (1 << 22) // max(L, 1)))
    return [min(size, n - k) for k in range(0, n, size)]


def _mean_se(x):
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0


def tail_expectation(law: DisorderLaw, L: int, M: float, n: int, seed: int,
                     workers: int | None = None) -> TailEstimate:
    """MC estimates of ``E[(H_L-M)_+]``, ``P[H_L>M]`` and the revisited term."""
    if n < 1000:
        raise ValueError("need at least 1000 Monte Carlo draws")
    tasks = [(law, L, M, k, seed, s) for s, k in enumerate(_batches(n, L))]
    res = run_tasks(_tail_task, tasks, workers)
    ex = np.concatenate([r[0] for r in res])
    hit = np.concatenate([r[1] for r in res])
    rev = np.concatenate([r[2] for r in res])
    return TailEstimate(L, M, n, *_mean_se(ex), *_mean_se(hit), *_mean_se(rev))


def exp_tail_bound(variance: float, L: int, M: float) -> float:
    """``(4 var L^3 / M) exp(-M^2 / (4 var L))``."""
    return 4.0 * variance * L**3 / M * math.exp(-M * M / (4.0 * variance * L))


def hl_moment_curve(law: DisorderLaw, L_grid: Sequence[int], q: float, n: int, seed: int,
                    workers: int | None = None):
    """MC ``E[H_L^q]`` over ``L_grid`` and its fitted log-log exponent.

    Returns ``(points, slope)`` with points ``(L, mean, stderr)``.
    """
    pts = []
    for i, L in enumerate(L_grid):
        tasks = [(law, int(L), math.inf, k, seed, 10_000 * (i + 1) + s)
                 for s, k in enumerate(_batches(n, int(L)))]
        H = np.concatenate([r[3] for r in run_tasks(_tail_task, tasks, workers)])
        pts.append((int(L), *_mean_se(H**q)))
    slope = float(np.polyfit(np.log([p[0] for p in pts]), np.log([p[1] for p in pts]), 1)[0])
    return pts, slope


# -- schedules ---------------------------------------------------------------

@dataclass(frozen=True)
class Schedule:
    """Block length ``L_J`` and threshold ``M_J`` as functions of ``J > 1``.

    ``eta_p`` is the convergence exponent of the upper bound the schedule is
    tuned for.
    """

    regime: str
    side: str
    theta: float
    p: float
    eta_p: float
    _L: Callable[[float], float]
    _M: Callable[[float], float]

    def L_J(self, J: float) -> int:
        if J <= 1:
            raise ValueError("schedules are defined for J > 1")
        return max(1, math.floor(self._L(J)))

    def M_J(self, J: float) -> float:
        if J <= 1:
            raise ValueError("schedules are defined for J > 1")
        return self._M(J)


def eta_poly(p: float) -> float:
    if p < 2:
        raise ValueError(f"p must be >= 2, got {p}")
    if p >= 3:
        return 4 * p / (3 * p + 2)
    return 2 * p * (p - 1) / (p * p + p - 1)


def schedule_for(regime: str, theta: float = 1.0, p: float = math.inf, side: str = "upper") -> Schedule:
    """Schedule for ``regime`` in ``{"exp", "poly"}``.

    ``exp`` (finite exponential moments, also the ``p >= 3`` lower bound):
    ``L = floor(J^{4/3} / log(J)^{1/3})``, ``M = 6 theta J^{2/3} log(J)^{1/3}``.
    ``poly`` upper, ``p >= 3``: ``L = floor(J^eta)``, ``M = J^{2-eta}``,
    ``eta = 4p/(3p+2)``.
    ``poly`` upper, ``2 <= p < 3``: ``L = floor(J^{2 eta/(p-1)})``,
    ``M = J^{2-eta}``, ``eta = 2p(p-1)/(p^2+p-1)``.
    ``poly`` lower, ``2 <= p < 3``: ``L = floor(J^{4/p} / log(J)^{1/p})``,
    ``M = 6 theta J^{2/p} log(J)^{(p-1)/(2p)}``.
    """
    regime = {"expmoments": "exp", "exp_moments": "exp"}.get(regime.lower(), regime.lower())
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if regime == "exp" or (regime == "poly" and side == "lower" and p >= 3):
        return Schedule("exp", side, theta, p, 4 / 3,
                        lambda J: J ** (4 / 3) / math.log(J) ** (1 / 3),
                        lambda J: 6 * theta * J ** (2 / 3) * math.log(J) ** (1 / 3))
    if regime != "poly":
        raise ValueError(f"unknown regime {regime!r}")
    eta = eta_poly(p)
    if side == "lower":
        return Schedule("poly", side, theta, p, eta,
                        lambda J: J ** (4 / p) / math.log(J) ** (1 / p),
                        lambda J: 6 * theta * J ** (2 / p) * math.log(J) ** ((p - 1) / (2 * p)))
    if p >= 3:
        return Schedule("poly", side, theta, p, eta, lambda J: J**eta, lambda J: J ** (2 - eta))
    return Schedule("poly", side, theta, p, eta,
                    lambda J: J ** (2 * eta / (p - 1)), lambda J: J ** (2 - eta))


def regime_for(law: DisorderLaw) -> str:
    return "exp" if law.exp_moment_radius() > 0 else "poly"


# -- coupled coarse-grained chains ---------------------------------------------

def _coupled_task(task):
    law, Js, L, nblocks, seed, stream, a, b = task
    rng = rng_for(seed, stream)
    fine = LogChainState.start(Js, a)
    coarse = LogChainState.start(Js, a)
    per = max(1, (1 << 16) // L)
    done = 0
    while done < nblocks:
        k = min(per, nblocks - done)
        h = law.draw(rng, k * L)
        fine.advance(h)
        coarse.advance(block_sums(h, L))
        done += k
    N = nblocks * L
    return fine.log_z(b) / N, coarse.log_z(b) / N


def coupled_block_free_energy(law: DisorderLaw, J_grid: Sequence[float], L: int, chain_length: int,
                              replicas: int, seed: int, boundary=(1, 1), workers: int | None = None,
                              stream_offset: int = 0):
    """Per-replica ``F_mu`` and ``F_{mu^{*L}} / L`` on the same realisation.

    The coarse chain runs on the block sums of the fine chain's fields, so
    the pair is coupled exactly as in the block rewrite. Returns two arrays
    of shape ``(replicas, len(J_grid))``.
    """
    Js = np.asarray(J_grid, dtype=float)
    nblocks = max(1, int(chain_length) // L)
    a, b = boundary
    tasks = [(law, Js, L, nblocks, seed, stream_offset + r, a, b) for r in range(replicas)]
    res = run_tasks(_coupled_task, tasks, workers)
    return np.array([r[0] for r in res]), np.array([r[1] for r in res])
