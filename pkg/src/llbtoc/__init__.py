"""Time-optimal control of the Landau-Lifshitz-Bloch equation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConfigError,
    ConvergenceError,
    DivergedError,
    LLBError,
    TargetUnreachableError,
    TransversalityError,
    TrivialCaseError,
)
from .fields import ControlTrajectory, Grid, SobolevMetric, make_grid  # noqa: E402
from .forward import TargetSpec, hitting_time, simulate  # noqa: E402
from .objective import HittingProblem  # noqa: E402
from .optimizer import OptimizeConfig, check_optimality, optimize  # noqa: E402
