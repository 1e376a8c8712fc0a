"""Exception types shared across the package."""


class MSHEError(Exception):
    """Base class for all package errors."""


class ConfigError(MSHEError, ValueError):
    """Invalid configuration or precondition violation.

    ``key`` names the offending configuration entry when one applies.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class DomainMismatchError(MSHEError, ValueError):
    """Two fields live on different domains."""


class NonFiniteError(MSHEError, ValueError):
    """A field contains NaN or Inf."""


class DivergenceError(MSHEError, RuntimeError):
    """Numerical blow-up during time integration.

    Attributes
    ----------
    time : float or None
        Simulation time at which the failure was detected.
    trajectory : Trajectory or None
        Records accumulated before the failure (for partial flushing).
    """

    def __init__(self, message, time=None, trajectory=None):
        super().__init__(message)
        self.time = time
        self.trajectory = trajectory


class ConvergenceError(MSHEError, RuntimeError):
    """Newton iteration did not converge; carries the last residual."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateError(ConvergenceError):
    """Singular bordered Jacobian in the equilibrium solver."""


class AssemblyError(MSHEError, ValueError):
    """Linearized operator failed its symmetry check."""


class EstimationError(MSHEError, ValueError):
    """Not enough usable data points for a fit or estimate."""
