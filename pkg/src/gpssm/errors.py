"""Exception types raised by the library.

Every numerical failure derives from :class:`NumericalFailure` so callers
(the CLI in particular) can map the whole family to a single exit status.
"""


class GpSsmError(Exception):
    """Base class for all library errors."""


class ConfigError(GpSsmError, ValueError):
    """Invalid user input: hyperparameters, intervals, dimensions, files."""


class DimensionMismatch(ConfigError):
    pass


class IntervalInvalid(ConfigError):
    pass


class UnsupportedKernel(ConfigError):
    pass


class NotOneDimensional(ConfigError):
    pass


class EmptySample(ConfigError):
    pass


class NumericalFailure(GpSsmError, ArithmeticError):
    """A computation that cannot produce a trustworthy result."""


class FactorizationFailure(NumericalFailure):
    pass


class OptimizationFailure(NumericalFailure):
    pass


class DegenerateVariance(NumericalFailure):
    pass


class NoSolution(NumericalFailure):
    """The discretized operator has no eigenvalue at 1 (no stationary density)."""


class SolverStall(NumericalFailure):
    pass
