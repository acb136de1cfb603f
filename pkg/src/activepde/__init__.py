"""Deep least-squares PDE solver with residual-driven adaptive collocation sampling."""

from .estimator import DeepLeastSquaresSolver
from .exceptions import (
    ActivePDEError,
    ConfigurationError,
    ContractViolation,
    DegenerateDensityError,
    DivergenceError,
)
from .network import SolutionNetwork, learning_rate
from .problems import get_problem
from .trainer import TrainingConfig, TrainingHistory, train

__all__ = [
    "ActivePDEError",
    "ConfigurationError",
    "ContractViolation",
    "DeepLeastSquaresSolver",
    "DegenerateDensityError",
    "DivergenceError",
    "SolutionNetwork",
    "TrainingConfig",
    "TrainingHistory",
    "get_problem",
    "learning_rate",
    "train",
]

__version__ = "0.1.0"
