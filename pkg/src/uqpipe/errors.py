"""Exception types.

Two broad families matter for the CLI exit codes: ``ValidationError``
(bad inputs, shapes, config, missing artifacts -> exit 2) and
``NumericalError`` (degenerate or ill-conditioned computations -> exit 3).
"""


class UqError(Exception):
    """Base class for all package errors."""


class ValidationError(UqError, ValueError):
    """Invalid arguments, shapes, domains, files or configuration."""


class NumericalError(UqError, RuntimeError):
    """A computation failed for numerical reasons."""


class DomainViolationError(ValidationError):
    """Point outside the declared input domain ("domain violation")."""


class ShapeError(ValidationError):
    """Dimension mismatch between arrays ("shape error")."""


class DegreeOverflowError(ValidationError):
    """Requested polynomial degree above the configured maximum."""


class BasisTooLargeError(ValidationError):
    """Multi-index set cardinality above the configured cap."""


class DegenerateBoundsError(ValidationError):
    """Box bounds with lower >= upper."""


class DegenerateSampleError(NumericalError):
    """Sample with zero total variance ("degenerate sample")."""


class DegenerateTargetError(NumericalError):
    """Regression target with zero variance ("degenerate target")."""


class IllConditionedModelError(NumericalError):
    """Rank-deficient regressor selection ("ill-conditioned model")."""


class LeverageSaturationError(NumericalError):
    """A leave-one-out leverage reached one ("leverage saturation")."""


class DegeneratePceError(NumericalError):
    """Expansion with zero variance ("degenerate pce")."""


class DegenerateFunctionError(NumericalError):
    """Constant function where variance is required ("degenerate function")."""


class IncompatibleExpansionsError(ValidationError):
    """Expansions built on different bases ("incompatible expansions")."""


class ChainInitError(NumericalError):
    """Sampler could not find a feasible starting point."""


class InsufficientSamplesError(ValidationError):
    """Too few pooled posterior samples ("insufficient samples")."""


class ArtifactError(ValidationError):
    """Missing or inconsistent pipeline artifact."""


class CsvFormatError(ValidationError):
    """Malformed CSV input; message carries row/column context."""


class ConfigError(ValidationError):
    """Invalid pipeline configuration."""
