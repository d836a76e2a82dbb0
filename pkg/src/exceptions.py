class TransLimError(Exception):
    """Base exception class for the credit limit optimizer"""
    pass

class ConfigurationError(TransLimError):
    """Raised when an environment or .env setting cannot be parsed"""
    pass

class UsageError(TransLimError):
    """Raised when the command line is malformed"""
    pass

# Transforms

class TransformError(TransLimError):
    """Base class for Laplace transform errors."""
    pass

class InvalidSpecError(TransformError):
    """Raised when a distribution has non-positive parameters or the wrong role"""
    pass

class ArgumentOutsideRegionError(TransformError):
    """Raised when a transform argument lies left of the abscissa of convergence"""
    pass

class DivergentGeometricTermError(TransformError):
    """Raised when |g(w)f(theta+psi)| >= 1 in the triple transform"""
    pass

class PoleAtOriginError(TransformError):
    """Raised when a transform is evaluated exactly at its pole at zero"""
    pass

class UnsupportedLawError(TransformError):
    """Raised when a closed form needs Poisson arrivals or non-lattice marks"""
    pass

# Inversion

class InversionError(TransLimError):
    """Base class for numerical inversion errors."""

    def __init__(self, message: str, index: int = None):
        super().__init__(message)
        self.index = index

class NonPositiveTimeError(InversionError):
    """Raised when inversion is requested at t <= 0"""
    pass

class AbscissaViolationError(InversionError):
    """Raised when the Bromwich line A/(2t) is not right of the abscissa"""
    pass

class NonFiniteTransformValueError(InversionError):
    """Raised when the transform returns NaN or infinity at a node"""
    pass

# Model and optimizer

class ModelError(TransLimError):
    """Base class for model evaluation errors."""
    pass

class UnsupportedPolicyForAnalyticError(ModelError):
    """Raised when the retrial policy is requested from the analytic model"""
    pass

class OptimizationError(TransLimError):
    """Base class for limit optimization errors."""
    pass

class RootNotBracketedError(OptimizationError):
    """Raised when the first-order condition has no root inside the limit set"""
    pass

class NonMonotoneDerivativeError(OptimizationError):
    """Raised when the balance derivative is not decreasing past its peak"""
    pass

class RatioUnattainableError(OptimizationError):
    """Raised when P(A(T) > 0) is below the funding ratio nu/gamma"""
    pass

# Simulation

class SimulationError(TransLimError):
    """Base class for Monte-Carlo errors."""
    pass

class InvalidReplicationsError(SimulationError):
    """Raised when fewer than one replication is requested"""
    pass

class UnsupportedDistributionError(SimulationError):
    """Raised when a distribution kind has no sampler"""
    pass

class EmptyGridError(SimulationError):
    """Raised when a limit grid has no points"""
    pass

# Ingest

class IngestError(TransLimError):
    """Base class for transaction ingest and fitting errors."""
    pass

class DataFileNotFoundError(IngestError):
    """Raised when the transaction file does not exist"""
    pass

class SchemaMismatchError(IngestError):
    """Raised when the CSV header lacks a configured column"""
    pass

class FileEncodingError(IngestError):
    """Raised when an input file is not valid UTF-8"""
    pass

class RowParseError(IngestError):
    """Raised (and collected) when a single CSV row cannot be parsed"""

    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.reason = message

class EmptySeriesAfterFilterError(IngestError):
    """Raised when no purchases survive filtering"""
    pass

class InsufficientDataError(IngestError):
    """Raised when a fit has too few observations"""
    pass

class NonPositiveValueError(IngestError):
    """Raised when a Gamma fit sees a value <= 0"""
    pass

class NoConvergenceError(IngestError):
    """Raised when the Gamma shape iteration does not converge"""
    pass
