"""Numerical lab for the random field Ising chain at large coupling."""

from .chain import (
    ChainParams,
    FlipDensityReport,
    FreeEnergyEstimate,
    LogChainState,
    flip_density_limit,
    flip_observables,
    free_energy,
    log_partition,
    step_matrix,
)
from .coarsegrain import BlockBoundReport, Schedule, block_stats, schedule_for, tail_expectation, verify_block_bounds
from .continuum import BrownianBlock, ContinuumEval, continuum_block_z, continuum_free_energy, sample_brownian_block
from .disorder import DisorderLaw, EmpiricalSample, block_convolve, sample, w1_clt_curve, w1_distance
from .experiments import SweepResult, approximation_chain_report, leading_coefficient_sweep, sandwich_test_gaussian

__version__ = "0.1.0"
