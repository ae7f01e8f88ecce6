"""Numerics for the two-dimensional parabolic Anderson model with white-noise potential."""

from .chi_variational import ChiResult, gn_quotient, ground_state_oracle, maximize_quotient
from .feynman_kac import DriftData, build_drift, mc_total_mass, picard_solve_Y, simulate_paths
from .grid_spectral import BoxSpec, GridField, besov_norm, forward_transform, inverse_transform, lp_decompose
from .hamiltonian import OperatorSpec, Spectrum, top_eigenpairs
from .noise import MollifierSpec, enhance, mollify, renorm_constant_exact, sample_white_noise
from .pam_evolution import EvolutionResult, InitialCondition, evolve, spectral_solution
from .paracontrolled import paraproduct, resonant, wick_square_grad_z

__version__ = "0.1.0"

__all__ = [
    "BoxSpec",
    "ChiResult",
    "DriftData",
    "EvolutionResult",
    "GridField",
    "InitialCondition",
    "MollifierSpec",
    "OperatorSpec",
    "Spectrum",
    "besov_norm",
    "build_drift",
    "enhance",
    "evolve",
    "forward_transform",
    "gn_quotient",
    "ground_state_oracle",
    "inverse_transform",
    "lp_decompose",
    "maximize_quotient",
    "mc_total_mass",
    "mollify",
    "paraproduct",
    "picard_solve_Y",
    "renorm_constant_exact",
    "resonant",
    "sample_white_noise",
    "simulate_paths",
    "spectral_solution",
    "top_eigenpairs",
    "wick_square_grad_z",
]
