"""Exception types raised by the numerical routines.

Every failure mode that callers are expected to handle gets its own class so
that the CLI can map exceptions to machine-readable error records.
"""


class SpenvelopeError(Exception):
    """Base class for all package errors."""


class SingularCorrelation(SpenvelopeError):
    """Spatial correlation matrix is not positive definite (after one jitter retry)."""


class SingularCovariance(SpenvelopeError):
    """A determinant argument in the likelihood is numerically singular."""


class SingularInformation(SpenvelopeError):
    """An information or M matrix required for asymptotic variances is singular."""


class RankDeficiency(SpenvelopeError):
    """A GLS normal-equations matrix is singular (e.g. n too small for p)."""


class OptimFailure(SpenvelopeError):
    """Optimizer failed to produce a finite optimum within its budget."""


class DimensionError(SpenvelopeError):
    """Inputs have inconsistent or unsupported dimensions."""


class MissingThreshold(SpenvelopeError):
    """Detection-threshold replacement requested for a column without a threshold."""


class NonpositiveComponent(SpenvelopeError):
    """Compositional operation applied to a non-positive component value."""


class OutOfRange(SpenvelopeError):
    """Value outside the domain of a transform."""
