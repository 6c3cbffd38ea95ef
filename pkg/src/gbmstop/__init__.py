"""Perpetual stopping and entrance problems on geometric Brownian motion.

The core objects: GbmParameters (the diffusion and discount rate, any
sign), ProfitFunction (piecewise-analytic running profit), and solve(),
which classifies the problem, finds the free boundaries, and assembles
the value function.  verify hosts the independent a-posteriori checks,
sensitivity the comparative statics, estimator the fit/predict facade.
"""

from .errors import (
    BadParametersError,
    BracketFailureError,
    DivergentIntegralError,
    DominanceViolatedError,
    GbmStopError,
    IllPosedParameterError,
    NoConvergenceError,
    NotApplicableError,
    NotIntegrableError,
    TruncationDominatesError,
    UnsupportedShapeError,
    VerificationError,
)
from .estimator import EntranceValueEstimator, StoppingValueEstimator
from .model import GbmParameters, from_roots
from .profit import (
    Constant,
    Polynomial,
    Power,
    ProfitFunction,
    Segment,
    ShiftedReciprocal,
    gross_profit,
)
from .quadrature import QuadConfig
from .solver import (
    EntranceSolution,
    ProblemClass,
    StoppingSolution,
    Thresholds,
    solve,
    solve_entrance,
)

__version__ = "0.1.0"

__all__ = [
    "GbmParameters",
    "from_roots",
    "ProfitFunction",
    "Segment",
    "Polynomial",
    "Power",
    "Constant",
    "ShiftedReciprocal",
    "gross_profit",
    "QuadConfig",
    "ProblemClass",
    "Thresholds",
    "StoppingSolution",
    "EntranceSolution",
    "solve",
    "solve_entrance",
    "StoppingValueEstimator",
    "EntranceValueEstimator",
    "GbmStopError",
    "IllPosedParameterError",
    "UnsupportedShapeError",
    "BadParametersError",
    "DivergentIntegralError",
    "NoConvergenceError",
    "NotIntegrableError",
    "NotApplicableError",
    "BracketFailureError",
    "TruncationDominatesError",
    "DominanceViolatedError",
    "VerificationError",
    "__version__",
]
