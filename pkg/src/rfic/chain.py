"""Discrete random field Ising chain: partition functions and free energy.

Spins are indexed ``0 -> +1`` and ``1 -> -1``. The partition function with
boundary spins ``(a, b)`` is entry ``[a, b]`` of the product of step
matrices; it is accumulated in log scale with a renormalisation after every
site.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from ._parallel import run_tasks
from .disorder import DisorderLaw, rng_for

__all__ = [
    "ChainParams",
    "LogChainState",
    "FreeEnergyEstimate",
    "FlipDensityEstimate",
    "FlipDensityReport",
    "ReplicaTable",
    "step_matrix",
    "log_partition",
    "log_partition_matrix",
    "flip_observables",
    "run_replicas",
    "free_energy",
    "flip_density_limit",
]

CHUNK = 1 << 16
MIN_CHAIN_LENGTH = 1000


def _idx(spin: int) -> int:
    if spin not in (1, -1):
        raise ValueError(f"boundary spins must be +1 or -1, got {spin}")
    return 0 if spin == 1 else 1


@dataclass(frozen=True)
class ChainParams:
    J: float
    boundary: tuple[int, int] = (1, 1)

    def __post_init__(self):
        if not math.isfinite(self.J) or self.J < 0:
            raise ValueError(f"J must be finite and >= 0, got {self.J}")
        a, b = self.boundary
        _idx(a), _idx(b)
        object.__setattr__(self, "boundary", (int(a), int(b)))

    @property
    def a(self) -> int:
        return self.boundary[0]

    @property
    def b(self) -> int:
        return self.boundary[1]


def _coupling(params) -> float:
    return params.J if isinstance(params, ChainParams) else float(params)


def step_matrix(h: float, params) -> np.ndarray:
    """Transfer matrix with entries ``exp(-2J 1{c != b} + b h)``, rows ``c``."""
    J = _coupling(params)
    spins = np.array([1.0, -1.0])
    flip = spins[:, None] != spins[None, :]
    return np.exp(-2.0 * J * flip + spins[None, :] * h)


@dataclass
class LogChainState:
    """Running row vector ``e_a M(h_1) ... M(h_n)`` in log scale.

    Holds one row per coupling in ``J``. ``logvec`` has max 0 per row and
    ``lognorm`` collects the subtracted maxima. With ``order >= 1`` the state
    also carries ``grad = d/dJ log v`` and with ``order == 2``
    ``curv = d^2/dJ^2 log v`` per end spin.
    """

    J: np.ndarray
    logvec: np.ndarray
    lognorm: np.ndarray
    grad: np.ndarray
    curv: np.ndarray
    order: int = 0
    steps: int = 0

    @classmethod
    def start(cls, J, a: int = 1, order: int = 0) -> "LogChainState":
        Js = np.atleast_1d(np.asarray(J, dtype=float)).copy()
        if order not in (0, 1, 2):
            raise ValueError("order must be 0, 1 or 2")
        logvec = np.full((Js.size, 2), -np.inf)
        logvec[:, _idx(a)] = 0.0
        return cls(Js, logvec, np.zeros(Js.size), np.zeros((Js.size, 2)),
                   np.zeros((Js.size, 2)), order)

    def advance(self, h) -> "LogChainState":
        h = np.ascontiguousarray(h, dtype=float)
        _kernels.advance(h, self.J, self.logvec, self.lognorm, self.grad, self.curv, self.order)
        self.steps += h.size
        return self

    def log_z(self, b: int = 1) -> np.ndarray:
        return self.lognorm + self.logvec[:, _idx(b)]

    # derivative companions of the unnormalised vector, under the same
    # normalisation as ``exp(logvec)``
    @property
    def d1(self) -> np.ndarray:
        return np.exp(self.logvec) * self.grad

    @property
    def d2(self) -> np.ndarray:
        return np.exp(self.logvec) * (self.curv + self.grad**2)


def log_partition_matrix(h, J: float) -> np.ndarray:
    """``log Z^{a,b}`` for all four boundary pairs (rows ``a``, columns ``b``)."""
    h = np.ascontiguousarray(h, dtype=float)
    if h.size == 0:
        raise ValueError("empty chain")
    return _kernels.log_transfer(h, float(J))


def log_partition(h_seq, params, range: tuple[int, int] | None = None) -> float:
    """``log Z`` on sites ``l..r`` (1-based, inclusive) with boundary ``(a, b)``.

    ``sigma_{l-1} = a`` and ``sigma_r = b``; the full chain is the default
    range.
    """
    if not isinstance(params, ChainParams):
        params = ChainParams(float(params))
    h = np.asarray(h_seq, dtype=float)
    lo, hi = (1, h.size) if range is None else range
    if not (1 <= lo <= hi <= h.size):
        raise ValueError(f"invalid range [{lo}, {hi}] for a chain of length {h.size}")
    state = LogChainState.start(params.J, params.a).advance(h[lo - 1:hi])
    return float(state.log_z(params.b)[0])


@dataclass(frozen=True)
class FlipDensityReport:
    mean_density: float
    variance_density: float
    N: int


def flip_observables(h_seq, params) -> FlipDensityReport:
    """Gibbs mean and variance of the spin-flip density on one chain.

    Uses ``E[flips/N] = -1/2 d/dJ (log Z / N)`` and
    ``Var[flips/N] = 1/(4N) d^2/dJ^2 (log Z / N)``, with both derivatives
    propagated exactly through the product.
    """
    if not isinstance(params, ChainParams):
        params = ChainParams(float(params))
    h = np.asarray(h_seq, dtype=float)
    N = h.size
    st = LogChainState.start(params.J, params.a, order=2).advance(h)
    k = _idx(params.b)
    g = st.grad[0, k]
    c = st.curv[0, k]
    mean = min(max(-0.5 * g / N, 0.0), 1.0)
    var = max(c / (4.0 * N * N), 0.0)
    return FlipDensityReport(mean, var, N)


@dataclass(frozen=True)
class FreeEnergyEstimate:
    value: float
    stderr: float
    chain_length: int
    replicas: int
    seed: int
    J: float = math.nan


@dataclass(frozen=True)
class FlipDensityEstimate(FreeEnergyEstimate):
    """Replica mean of the Gibbs flip density, an estimate of ``-F'(J)/2``."""


@dataclass
class ReplicaTable:
    """Per-replica, per-coupling results of :func:`run_replicas`."""

    J: np.ndarray
    free_energy: np.ndarray  # (replicas, len(J))
    flip_density: np.ndarray | None
    flip_variance: np.ndarray | None
    chain_length: int
    seed: int
    boundary: tuple[int, int] = (1, 1)
    meta: dict = field(default_factory=dict)

    @property
    def replicas(self) -> int:
        return self.free_energy.shape[0]

    @staticmethod
    def _reduce(x):
        m = x.mean(axis=0)
        if x.shape[0] > 1:
            se = x.std(axis=0, ddof=1) / math.sqrt(x.shape[0])
        else:
            se = np.zeros_like(m)
        return m, se

    def free_energy_estimates(self) -> list[FreeEnergyEstimate]:
        m, se = self._reduce(self.free_energy)
        return [FreeEnergyEstimate(float(v), float(s), self.chain_length, self.replicas, self.seed, float(J))
                for J, v, s in zip(self.J, m, se)]

    def flip_density_estimates(self) -> list[FlipDensityEstimate]:
        if self.flip_density is None:
            raise ValueError("run_replicas was called with order=0")
        m, se = self._reduce(self.flip_density)
        return [FlipDensityEstimate(float(v), float(s), self.chain_length, self.replicas, self.seed, float(J))
                for J, v, s in zip(self.J, m, se)]


def _one_replica(task):
    law, Js, N, seed, stream, a, b, order = task
    rng = rng_for(seed, stream)
    st = LogChainState.start(Js, a, order)
    done = 0
    while done < N:
        n = min(CHUNK, N - done)
        st.advance(law.draw(rng, n))
        done += n
    k = _idx(b)
    f = st.log_z(b) / N
    g = st.grad[:, k]
    c = st.curv[:, k]
    return f, -0.5 * g / N, c / (4.0 * N * N)


def run_replicas(law: DisorderLaw, J_grid: Sequence[float], chain_length: int, replicas: int = 32,
                 seed: int = 0, boundary: tuple[int, int] = (1, 1), order: int = 0,
                 workers: int | None = None, stream_offset: int = 0) -> ReplicaTable:
    """Run independent chains, each sharing its disorder across all of ``J_grid``.

    Replica ``r`` draws from stream ``stream_offset + r`` of ``seed``; using
    one disorder realisation for every coupling makes differences across the
    grid low-noise.
    """
    N = int(chain_length)
    if N < 1:
        raise ValueError("chain_length must be >= 1")
    if replicas < 1:
        raise ValueError("replicas must be >= 1")
    Js = np.asarray(J_grid, dtype=float)
    if Js.ndim != 1 or Js.size == 0 or np.any(Js < 0) or not np.all(np.isfinite(Js)):
        raise ValueError("J_grid must be a non-empty list of finite values >= 0")
    a, b = ChainParams(0.0, boundary).boundary
    tasks = [(law, Js, N, seed, stream_offset + r, a, b, order) for r in range(replicas)]
    res = run_tasks(_one_replica, tasks, workers)
    f = np.array([r[0] for r in res])
    dens = np.array([r[1] for r in res]) if order >= 1 else None
    var = np.array([r[2] for r in res]) if order >= 2 else None
    return ReplicaTable(Js, f, dens, var, N, seed, (a, b), {"law": law.to_dict(), "order": order})


def free_energy(law: DisorderLaw, J: float, chain_length: int, replicas: int = 32, seed: int = 0,
                boundary: tuple[int, int] = (1, 1), workers: int | None = None) -> FreeEnergyEstimate:
    """Replica average of ``log Z_N^{a,b}(J) / N``."""
    if chain_length < MIN_CHAIN_LENGTH:
        raise ValueError(f"chain_length must be >= {MIN_CHAIN_LENGTH}")
    tab = run_replicas(law, [J], chain_length, replicas, seed, boundary, 0, workers)
    return tab.free_energy_estimates()[0]


def flip_density_limit(law: DisorderLaw, J: float, chain_length: int, replicas: int = 32, seed: int = 0,
                       boundary: tuple[int, int] = (1, 1), workers: int | None = None) -> FlipDensityEstimate:
    if chain_length < MIN_CHAIN_LENGTH:
        raise ValueError(f"chain_length must be >= {MIN_CHAIN_LENGTH}")
    tab = run_replicas(law, [J], chain_length, replicas, seed, boundary, 1, workers)
    return tab.flip_density_estimates()[0]
