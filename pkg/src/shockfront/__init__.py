"""Front tracking for a unilaterally constrained free-boundary evolution.

The front position L(t) moves with the velocity field U while the cohesion
gamma(t, L) stays above a threshold, and is pushed forward (possibly by a
jump) when it would drop below.  Two independent solvers (Yosida penalty and
catch-up projection), multiplier reconstruction and a-priori bound checks.
"""
from .bounds import BoundReport, EstimateParams, certify_run, default_params
from .errors import ShockfrontError
from .fields import BoundsCertificate, FieldSpec, Scenario, validate_hypotheses
from .multiplier import Regime, classify_regimes, reconstruct_multiplier
from .penalty import PenaltyOptions, solve_penalized
from .projection import ProjectionOptions, solve_projected
from .sweep import compare_solvers, epsilon_sweep, fit_rate
from .trajectory import JumpAtom, Trajectory

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "BoundsCertificate", "EstimateParams", "FieldSpec", "JumpAtom",
    "PenaltyOptions", "ProjectionOptions", "Regime", "Scenario", "ShockfrontError",
    "Trajectory", "certify_run", "classify_regimes", "compare_solvers", "default_params",
    "epsilon_sweep", "fit_rate", "reconstruct_multiplier", "solve_penalized",
    "solve_projected", "validate_hypotheses",
]
