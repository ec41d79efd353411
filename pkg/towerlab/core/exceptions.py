"""
Custom exceptions for towerlab

Provides specific exception types for the failure modes of the numerical
pipeline (invalid parameters, under-resolved meshes, failed solves) and of
the run harness (configuration, registry I/O), so callers can tell a
scientific-check failure apart from an execution error.
"""

from typing import List, Optional


class TowerLabError(Exception):
    """Base exception for all towerlab errors"""
    pass


class InvalidParameterError(TowerLabError):
    """Raised when invalid parameters are provided"""
    def __init__(self, parameter: str, value, message: str = None):
        if message is None:
            message = f"Invalid parameter '{parameter}': {value}"
        else:
            message = f"Invalid parameter '{parameter}' ({value}): {message}"
        super().__init__(message)
        self.parameter = parameter
        self.value = value


class ConfigurationError(TowerLabError):
    """Raised when a run configuration cannot be loaded or validated"""
    def __init__(self, message: str = "Invalid run configuration", line: Optional[int] = None,
                 source: Optional[str] = None):
        location = ""
        if source is not None:
            location = f"{source}:{line}: " if line is not None else f"{source}: "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")
        self.message = message
        self.line = line
        self.source = source


class DomainError(TowerLabError):
    """Raised when an operation is not available on the requested domain,
    or a point lies outside it"""
    def __init__(self, message: str = "Operation not supported on this domain"):
        super().__init__(message)


class ResolutionError(TowerLabError):
    """Raised when a mesh is too coarse for the scales it must resolve"""
    def __init__(self, message: str = "Mesh under-resolved", nodes_per_decade: float = None):
        super().__init__(message)
        self.nodes_per_decade = nodes_per_decade


class QuadratureError(TowerLabError):
    """Raised when adaptive quadrature does not reach its tolerance"""
    def __init__(self, message: str = "Quadrature did not converge", estimate: float = None):
        super().__init__(message)
        self.estimate = estimate


class LinearSolveError(TowerLabError):
    """Raised when a sparse factorization fails or is numerically singular"""
    def __init__(self, message: str = "Linear solve failed", condition_estimate: float = None):
        if condition_estimate is not None:
            message = f"{message} (condition estimate {condition_estimate:.3e})"
        super().__init__(message)
        self.condition_estimate = condition_estimate


class HarmonicSolveError(TowerLabError):
    """Raised when a harmonic extension does not satisfy its discrete equations"""
    def __init__(self, message: str = "Harmonic extension failed", residual: float = None):
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)
        self.residual = residual


class ContractionDivergedError(TowerLabError):
    """Raised when the fixed-point iteration stops contracting"""
    def __init__(self, ratios: List[float], suggestion: str = None):
        suggestion = suggestion or "try a smaller lambda or method='newton'"
        tail = ", ".join(f"{r:.3g}" for r in ratios[-3:])
        super().__init__(f"Fixed-point iteration diverged (last ratios: {tail}); {suggestion}")
        self.ratios = list(ratios)
        self.suggestion = suggestion


class NewtonError(TowerLabError):
    """Raised when the damped Newton iteration fails"""
    def __init__(self, reason: str, sigma_min: float = None, iterations: int = None):
        message = f"Newton iteration failed: {reason}"
        if sigma_min is not None:
            message += f" (Jacobian sigma_min {sigma_min:.3e})"
        super().__init__(message)
        self.reason = reason
        self.sigma_min = sigma_min
        self.iterations = iterations


class NumericalOverflowError(TowerLabError):
    """Raised when an exponential would leave the double-precision range"""
    def __init__(self, message: str = "Exponential overflow", exponent: float = None):
        super().__init__(message)
        self.exponent = exponent


class RegistryError(TowerLabError):
    """Raised when the run registry cannot be read or written"""
    def __init__(self, message: str = "Registry operation failed"):
        super().__init__(message)


class AsymptoticRegimeWarning(UserWarning):
    """Issued when an asymptotic statement is evaluated outside the regime
    where it is guaranteed (lambda >= 1, points outside their annulus)"""
