"""Optimal threshold dividends for spectrally negative Levy surplus processes
with a terminal reward paid when ruin happens by creeping."""
from .errors import (
    BoundaryMismatch,
    BracketFailure,
    CreepDivError,
    DivergentIntegral,
    ExpSumError,
    HJBViolation,
    InvalidConfig,
    ModelError,
    NumericalError,
    PoleEvaluation,
    RootIsolationFailure,
    ValidationError,
)
from .expsum import ExpPolySum, convolve_on
from .levy_model import AssumptionReport, LevyModel, psi_X, psi_Y, right_inverse, validate_assumptions
from .scale import ScalePair, apply_generator, boundary_values, build_scale_pair
from .simulate import SimConfig, SimOutcome, compare_strategies, simulate_batch
from .threshold import A_S, ThresholdSolution, g_S, r_S, solve_threshold, theta_S
from .value import ValueFunction, build_value, hjb_verify, p_S, value_derivatives

__version__ = "0.1.0"
