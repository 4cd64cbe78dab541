"""Coordinate-wise backtracking gradient descent with per-block Armijo step sizes."""
from .core import (
    BlockGradient,
    BlockPartition,
    BlockVector,
    CwArmijoError,
    ExclusionRegion,
    HyperParams,
    LearningRates,
)
from .linesearch import armijo_holds, base_backtracking, cw_armijo_holds, cw_backtracking
from .objectives import BUILTINS, Objective, builtin
from .optimizers import OrderPolicy, RunConfig, Status, Trajectory, run

__all__ = [
    "BUILTINS", "BlockGradient", "BlockPartition", "BlockVector", "CwArmijoError",
    "ExclusionRegion", "HyperParams", "LearningRates", "Objective", "OrderPolicy",
    "RunConfig", "Status", "Trajectory", "armijo_holds", "base_backtracking", "builtin",
    "cw_armijo_holds", "cw_backtracking", "run",
]
__version__ = "0.1.0"
