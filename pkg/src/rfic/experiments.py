"""Sweeps and diagnostics for the large-J behaviour of the free energy."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chain import FlipDensityEstimate, FreeEnergyEstimate, ReplicaTable, run_replicas
from .coarsegrain import (
    coupled_block_free_energy,
    eta_poly,
    exp_tail_bound,
    regime_for,
    schedule_for,
    tail_expectation,
)
from .continuum import brownian_range_samples, continuum_F, sandwich_error_terms
from .disorder import DisorderLaw, sample, w1_clt_curve, w1_distance

__all__ = [
    "SweepResult",
    "ApproximationChainReport",
    "SandwichResult",
    "W1ComparisonRow",
    "leading_coefficient_sweep",
    "theory_rate",
    "convexity_bracket",
    "approximation_chain_report",
    "sandwich_test_gaussian",
    "w1_comparison",
    "eta_threshold_table",
    "GOLDEN_THRESHOLD",
]

GOLDEN_THRESHOLD = (3 + math.sqrt(5)) / 2


def _loglog_slope(x, y):
    x, y = np.asarray(x, float), np.abs(np.asarray(y, float))
    ok = y > 0
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def theory_rate(law: DisorderLaw) -> float:
    """Log-log exponent of ``|2J F(J) - var|`` implied by the asymptotic bounds.

    Log factors are ignored; for polynomial moments the slower of the two
    one-sided rates is returned.
    """
    if law.kind == "gaussian":
        return -1.0
    if regime_for(law) == "exp":
        return -1.0 / 3.0
    p = law.p
    upper = 1.0 - eta_poly(p)
    lower = -1.0 / 3.0 if p >= 3 else (2.0 - p) / p
    return max(upper, lower)


@dataclass
class SweepResult:
    law: DisorderLaw
    J_grid: np.ndarray
    F_hat: list[FreeEnergyEstimate]
    flips: list[FlipDensityEstimate]
    coeff: np.ndarray
    coeff_se: np.ndarray
    flip_coeff: np.ndarray
    flip_coeff_se: np.ndarray
    fitted_rate: float
    theory_rate: float
    table: ReplicaTable = field(repr=False)

    def rows(self):
        for i, J in enumerate(self.J_grid):
            yield {
                "J": float(J),
                "F_hat": self.F_hat[i].value,
                "stderr": self.F_hat[i].stderr,
                "coeff": float(self.coeff[i]),
                "flip_coeff": float(self.flip_coeff[i]),
            }

    def to_dict(self) -> dict:
        t = self.table
        return {
            "law": self.law.to_dict(),
            "chain_length": t.chain_length,
            "replicas": t.replicas,
            "seed": t.seed,
            "boundary": list(t.boundary),
            "J_grid": [float(J) for J in self.J_grid],
            "F_hat": [e.value for e in self.F_hat],
            "F_stderr": [e.stderr for e in self.F_hat],
            "coeff": self.coeff.tolist(),
            "coeff_stderr": self.coeff_se.tolist(),
            "flip_density": [e.value for e in self.flips],
            "flip_density_stderr": [e.stderr for e in self.flips],
            "flip_coeff": self.flip_coeff.tolist(),
            "flip_coeff_stderr": self.flip_coeff_se.tolist(),
            "fitted_rate": self.fitted_rate,
            "theory_rate": self.theory_rate,
        }


def leading_coefficient_sweep(law: DisorderLaw, J_grid: Sequence[float], chain_length: int,
                              replicas: int = 32, seed: int = 0, boundary=(1, 1),
                              workers: int | None = None) -> SweepResult:
    """``2J F(J)`` and ``4J^2`` times the flip density over an increasing J grid.

    All couplings share each replica's disorder, so trends across the grid
    are resolved far below the per-point error bars.
    """
    Js = np.asarray(J_grid, dtype=float)
    if Js.size < 3 or np.any(np.diff(Js) <= 0):
        raise ValueError("J_grid must be strictly increasing with at least 3 points")
    tab = run_replicas(law, Js, chain_length, replicas, seed, boundary, order=1, workers=workers)
    F = tab.free_energy_estimates()
    D = tab.flip_density_estimates()
    fv = np.array([e.value for e in F])
    fs = np.array([e.stderr for e in F])
    dv = np.array([e.value for e in D])
    ds = np.array([e.stderr for e in D])
    coeff = 2 * Js * fv
    flip_coeff = 4 * Js**2 * dv
    return SweepResult(law, Js, F, D, coeff, 2 * Js * fs, flip_coeff, 4 * Js**2 * ds,
                       _loglog_slope(Js, coeff - law.variance), theory_rate(law), tab)


def convexity_bracket(sweep: SweepResult):
    """Bracket the flip density at interior grid points by difference quotients.

    Convexity of ``J -> log Z / N`` gives, per replica,
    ``-(F(J+) - F(J)) / (2 (J+ - J)) <= density(J) <= -(F(J) - F(J-)) / (2 (J - J-))``.
    Returns rows ``(J, lower, estimate, upper)`` of replica means.
    """
    t = sweep.table
    f = t.free_energy
    d = t.flip_density
    out = []
    Js = t.J
    for i in range(1, Js.size - 1):
        lo = -(f[:, i + 1] - f[:, i]) / (2 * (Js[i + 1] - Js[i]))
        hi = -(f[:, i] - f[:, i - 1]) / (2 * (Js[i] - Js[i - 1]))
        out.append((float(Js[i]), float(lo.mean()), float(d[:, i].mean()), float(hi.mean())))
    return out


def _paired(x):
    x = np.asarray(x, float).ravel()
    se = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else 0.0
    return float(x.mean()), se


@dataclass
class ApproximationChainReport:
    """Stages ``F_mu``, ``F_{mu*L}/L``, ``F_{N(L var)}/L``, ``F_{N(var)}``, ``var/2J``."""

    law: DisorderLaw
    J: float
    L: int
    M: float
    stages: list[tuple[float, float]]   # (value, stderr)
    gaps: list[tuple[float, float]]     # consecutive differences
    w1_over_L: float
    w1_over_L_se: float
    tail_excess: float                  # E[(H_L - M)_+]
    tail_excess_se: float
    flip_cost: float                    # e^{2(M - J)}

    @property
    def gap2_within_w1(self) -> bool:
        g, se = self.gaps[1]
        return abs(g) <= self.w1_over_L + 3 * math.hypot(se, self.w1_over_L_se)


def approximation_chain_report(law: DisorderLaw, J: float, seed: int, chain_length: int = 10**6,
                               replicas: int = 16, L: int | None = None, M: float | None = None,
                               n_w1: int = 200_000, n_tail: int = 20_000,
                               workers: int | None = None) -> ApproximationChainReport:
    """Estimate each link of the chain of approximations from ``F_mu(J)`` to ``var/2J``.

    ``(L, M)`` default to the upper-bound schedule of the law's regime. The
    first two stages run on one coupled realisation (the coarse chain uses
    the block sums of the fine chain), so at ``L = 1`` the first gap is
    exactly zero.
    """
    if J <= 1:
        raise ValueError("J must be > 1")
    sched = schedule_for(regime_for(law), law.theta, law.p)
    L = sched.L_J(J) if L is None else int(L)
    M = sched.M_J(J) if M is None else float(M)
    R = replicas
    fine, coarse = coupled_block_free_energy(law, [J], L, chain_length, R, seed, workers=workers)
    g_law = DisorderLaw.gaussian(L * law.variance)
    s2 = run_replicas(g_law, [J], max(1, chain_length // L), R, seed, workers=workers,
                      stream_offset=R).free_energy[:, 0] / L
    s3 = run_replicas(DisorderLaw.gaussian(law.variance), [J], chain_length, R, seed,
                      workers=workers, stream_offset=2 * R).free_energy[:, 0]
    # coarse log Z is divided by the fine length, i.e. it is F_{mu*L} / L
    s0, s1 = fine[:, 0], coarse[:, 0]
    s4 = law.variance / (2 * J)
    stages = [_paired(s0), _paired(s1), _paired(s2), _paired(s3), (s4, 0.0)]
    gaps = [
        _paired(s0 - s1),
        (stages[1][0] - stages[2][0], math.hypot(stages[1][1], stages[2][1])),
        (stages[2][0] - stages[3][0], math.hypot(stages[2][1], stages[3][1])),
        (stages[3][0] - s4, stages[3][1]),
    ]
    pt = w1_clt_curve(law, [L], n_w1, seed, replicates=4)[0]
    tail = tail_expectation(law, L, M, n_tail, seed, workers=workers)
    return ApproximationChainReport(law, J, L, M, stages, gaps, pt.w1 / L, pt.stderr / L,
                                    tail.excess, tail.excess_se, math.exp(2 * (M - J)))


@dataclass(frozen=True)
class SandwichResult:
    J: float
    M: float
    F_hat: float
    F_se: float
    lower: float
    lower_se: float
    upper: float
    upper_se: float

    @property
    def lower_ok(self) -> bool:
        return self.lower <= self.F_hat + 3 * math.hypot(self.F_se, self.lower_se)

    @property
    def upper_ok(self) -> bool:
        return self.F_hat <= self.upper + 3 * math.hypot(self.F_se, self.upper_se)

    @property
    def passed(self) -> bool:
        return self.lower_ok and self.upper_ok


def default_sandwich_M(J: float) -> float:
    return 6.0 * math.sqrt(math.log(J))


def sandwich_test_gaussian(J_grid: Sequence[float], chain_length: int = 10**6, replicas: int = 32,
                           seed: int = 0, M: float | None = None, G: int = 1000,
                           n_blocks: int = 20_000, F_hat: Sequence[FreeEnergyEstimate] | None = None,
                           workers: int | None = None) -> list[SandwichResult]:
    """Continuum sandwich for standard Gaussian disorder.

    ``F(J+M) - err_lo <= F_hat(J) <= F(J-M) + err_up`` with ``F`` the
    continuum free energy, ``err_up = E[2(H-M)_+]`` and
    ``err_lo = e^{-2J} + E[2(H-M)_+ + e^{2(H-M-J)}]``. ``M`` defaults to
    ``6 sqrt(log J)``. The range ``H`` of the Brownian block is estimated
    on a ``G``-point grid, which slightly underestimates it.
    Precomputed estimates can be passed through ``F_hat`` (aligned with
    ``J_grid``).
    """
    Js = [float(J) for J in J_grid]
    if any(J <= 1 for J in Js) and M is None:
        raise ValueError("default M needs J > 1")
    if F_hat is None:
        tab = run_replicas(DisorderLaw.gaussian(1.0), Js, chain_length, replicas, seed, workers=workers)
        F_hat = tab.free_energy_estimates()
    _, H = brownian_range_samples(n_blocks, G, seed, workers=workers)
    out = []
    for J, est in zip(Js, F_hat):
        m = default_sandwich_M(J) if M is None else float(M)
        t = sandwich_error_terms(H, J, m)
        out.append(SandwichResult(J, m, est.value, est.stderr,
                                  continuum_F(J + m) - t.lower, t.lower_se,
                                  continuum_F(J - m) + t.upper, t.upper_se))
    return out


@dataclass(frozen=True)
class W1ComparisonRow:
    J: float
    F_a: float
    F_b: float
    diff_se: float
    w1: float

    @property
    def passed(self) -> bool:
        return abs(self.F_a - self.F_b) <= self.w1 + 3 * self.diff_se


def w1_comparison(law_a: DisorderLaw, law_b: DisorderLaw, J_grid: Sequence[float],
                  chain_length: int = 10**6, replicas: int = 16, seed: int = 0,
                  n_w1: int = 10**6, workers: int | None = None) -> list[W1ComparisonRow]:
    """Free-energy difference of two disorder laws against their W1 distance."""
    ta = run_replicas(law_a, J_grid, chain_length, replicas, seed, workers=workers)
    tb = run_replicas(law_b, J_grid, chain_length, replicas, seed, workers=workers,
                      stream_offset=replicas)
    w = w1_distance(sample(law_a, n_w1, seed, stream=7_001), sample(law_b, n_w1, seed, stream=7_002))
    rows = []
    for ea, eb in zip(ta.free_energy_estimates(), tb.free_energy_estimates()):
        rows.append(W1ComparisonRow(ea.J, ea.value, eb.value, math.hypot(ea.stderr, eb.stderr), w))
    return rows


def eta_threshold_table(p_grid: Sequence[float]):
    """Rows ``(p, eta_p, eta_p > 1, p > (3 + sqrt 5)/2)``."""
    return [(float(p), eta_poly(p), eta_poly(p) > 1, p > GOLDEN_THRESHOLD) for p in p_grid]


def exp_tail_rows(law: DisorderLaw, pairs: Sequence[tuple[int, float]], n: int, seed: int,
                  workers: int | None = None):
    """Rows ``(L, M, estimate, stderr, bound)`` for the exponential tail bound."""
    rows = []
    for i, (L, M) in enumerate(pairs):
        t = tail_expectation(law, int(L), float(M), n, seed + i, workers=workers)
        rows.append((int(L), float(M), t.excess, t.excess_se, exp_tail_bound(law.variance, int(L), float(M))))
    return rows
