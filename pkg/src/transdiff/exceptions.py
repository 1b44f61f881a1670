"""Exception hierarchy shared by the package."""


class TransdiffError(Exception):
    """Base class for all package errors."""


class GeometryError(TransdiffError, RuntimeError):
    """Interface evaluation failed (e.g. projection did not converge).

    The offending point is kept in ``point``.
    """

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class ContractViolation(TransdiffError, ValueError):
    """An operation was called outside its documented precondition."""


class CoefficientError(TransdiffError, ValueError):
    """Coefficient field is not symmetric positive definite or violates its bounds."""


class DomainError(TransdiffError, ValueError):
    """Argument outside the mathematical domain (e.g. non-positive time)."""


class AssemblyError(TransdiffError, ValueError):
    """Finite-volume assembly rejected the grid or the coefficients."""


class UnsupportedCaseError(TransdiffError, ValueError):
    """Requested comparison has no reduced deterministic reference."""


class ConfigError(TransdiffError, ValueError):
    """Simulation or experiment configuration is invalid."""


class SimulationError(TransdiffError, RuntimeError):
    """One or more paths failed; ``failures`` maps path index to message."""

    def __init__(self, message, failures=None):
        super().__init__(message)
        self.failures = dict(failures or {})
