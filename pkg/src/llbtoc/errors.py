"""Exception classes. Each carries the CLI exit code for its class."""


class LLBError(Exception):
    exit_code = 1


class ConfigError(LLBError, ValueError):
    """Malformed configuration, invalid grid, or missing input file."""

    exit_code = 2


class TargetUnreachableError(LLBError):
    """The trajectory never enters the delta-tube within the horizon."""

    exit_code = 3


class TransversalityError(LLBError):
    """The trajectory grazes the tube boundary instead of crossing it."""

    exit_code = 4


class DivergedError(LLBError):
    """A forward solve exceeded the blow-up cap or produced non-finite values."""

    exit_code = 5


class ConvergenceError(LLBError):
    """Linear solver, line search or outer loop did not converge."""

    exit_code = 6


class TrivialCaseError(LLBError):
    """The initial state already lies inside the delta-tube."""

    exit_code = 7
