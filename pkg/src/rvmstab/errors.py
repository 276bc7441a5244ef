"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: configuration problems exit with 2,
violated theory invariants with 3, and everything else with 1.
"""


class RvmError(Exception):
    """Base class for every error raised by the package."""

    exit_code = 1


class GeometryError(RvmError):
    """Invalid curve, degenerate frame or a point outside the domain."""


class SolverError(RvmError):
    """Linear solve or eigensolve that failed or missed its residual target."""

    def __init__(self, message, condition_estimate=None):
        super().__init__(message)
        self.condition_estimate = condition_estimate


class DivergenceError(RvmError):
    """Fixed-point iteration that stopped contracting."""

    def __init__(self, message, ratios=()):
        super().__init__(message)
        self.ratios = list(ratios)


class MaxIterationsError(RvmError):
    """Fixed-point iteration that ran out of iterations before converging."""


class IntegratorError(RvmError):
    """Trajectory left the domain or produced non-finite values."""


class ZenoError(IntegratorError):
    """Too many boundary collisions within one trajectory."""


class AssemblyError(RvmError):
    """Operator assembly produced a matrix that fails its quality checks."""


class InvariantViolation(RvmError):
    """A property guaranteed by theory failed numerically; points at a bug."""

    exit_code = 3


class ConfigError(RvmError):
    """Missing or malformed configuration value."""

    exit_code = 2

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ParameterError(RvmError):
    """Parameters violating a documented constraint."""

    def __init__(self, message, constraint=None):
        super().__init__(message)
        self.constraint = constraint
