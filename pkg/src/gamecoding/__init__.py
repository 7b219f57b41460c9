"""Stackelberg equilibria of the two-node game of coding."""

from .adversary import (
    DiscreteSymmetricNoise,
    NoiseEvaluation,
    SignedMixture,
    acceptance_probability,
    brute_force_beta,
    evaluate,
    mse_mean,
    symmetrize,
    synthesize_optimal_noise,
)
from .config import SolveConfig
from .envelope import PiecewiseLinearEnvelope, Segment, Touch, beta, build_envelope, c_bounds, frontier
from .equilibrium import EquilibriumReport, brute_force_stackelberg, solve_stackelberg
from .errors import (
    ConfigurationError,
    DomainError,
    EvaluationError,
    GameOfCodingError,
    InfeasibleError,
    InsufficientDataError,
    MonotonicityError,
    UndefinedConditionalError,
)
from .honest_noise import HonestNoise, h, kernel_k, kernel_k_inv, kernel_nu
from .simulator import EmpiricalStats, SimConfig, mmse_gap_check, orthogonality_check, simulate
from .utility import UtilitySyntaxError, parse_utility

__version__ = "0.1.0"
