"""Spectral solver and verification toolkit for the rotating Gross-Pitaevskii equation."""
from .conservation import (
    ConservationLedger,
    angular_momentum_expectation,
    energy_e0,
    history_coefficient,
    mass,
    pseudoconformal_residuals,
)
from .field import GridSpec, SimulationParams, WaveField, make_grid, sample_coherent, sample_gaussian, sample_random, sample_vortex
from .operators import OperatorFrame, apply_H, apply_J, apply_Lz
from .propagator import EvolveConfig, Trajectory, evolve, linear_step, mehler_apply, propagate_linear, strang_step

__version__ = "0.1.0"
