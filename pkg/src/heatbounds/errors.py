"""Exception types shared across the package."""


class HeatboundsError(Exception):
    """Base class for all package errors."""


class SingularityError(HeatboundsError):
    """Derivative or projection query at a declared singular point."""


class UnsupportedGeometryError(HeatboundsError):
    """Operation not defined for this domain kind."""


class InvalidParameterError(HeatboundsError):
    """Parameter outside its admissible range."""


class ConvergenceError(HeatboundsError):
    """Iterative solver did not meet its tolerance within the budget.

    Carries the last iterate so callers can inspect or restart.
    """

    def __init__(self, message, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate


class ClockError(HeatboundsError):
    """Semigroup-time vs path-time mapping applied zero or multiple times."""


class MissingFunctionalError(HeatboundsError):
    """Path was simulated without the additive functional now requested."""


class DivergenceError(HeatboundsError):
    """Trajectory blow-up: gradient norm exceeded the configured bound."""


class StatisticalPowerError(HeatboundsError):
    """Too few samples for the requested statistical resolution."""


class SolverError(HeatboundsError):
    """PDE or eigenvalue solver failure (step control, stagnation)."""
