"""Online regularized kernel regression on non-stationary independent streams."""

__version__ = "0.1.0"

from .errors import OnlineRKHSError
from .kernel import Kernel
from .rkhs import KernelExpansion, TargetFunction
from .schedule import GainSchedule
from .stream import MarginalMeasure, NoiseModel, StreamSpec

__all__ = [
    "GainSchedule",
    "Kernel",
    "KernelExpansion",
    "MarginalMeasure",
    "NoiseModel",
    "OnlineRKHSError",
    "StreamSpec",
    "TargetFunction",
    "__version__",
]
