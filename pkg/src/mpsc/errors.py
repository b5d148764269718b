"""Exception and warning types shared across the toolkit."""


class MpscError(Exception):
    """Base class for toolkit errors."""


class DimensionError(MpscError, ValueError):
    """Array shapes do not match the model dimensions."""


class ConvergenceError(MpscError, RuntimeError):
    """An iterative routine hit its iteration cap."""


class SolverFailure(MpscError, RuntimeError):
    """An optimization stage could not produce a certified result."""


class SafetyFault(MpscError, RuntimeError):
    """A safety precondition was violated during closed-loop operation.

    ``dump`` carries whatever state the raiser could collect for post-mortem.
    """

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}


class RecursiveFeasibilityError(SafetyFault):
    """The recursive-mode program went infeasible after a feasible step."""


class ConfigError(MpscError, ValueError):
    """Experiment configuration failed validation."""


class EmptySetWarning(UserWarning):
    """A tightened set is empty or has an empty interior."""


class EnlargementWarning(UserWarning):
    """A terminal-set enlargement was rejected and rolled back."""
