"""Exception hierarchy shared across the package."""


class FurstlabError(Exception):
    """Base class for all package-specific errors."""


class ParseError(FurstlabError):
    """Ensemble config document could not be parsed."""


class ValidationError(FurstlabError):
    """Ensemble config parsed but violates an invariant."""


class DegenerateProjection(FurstlabError):
    """Point lies (numerically) in the removed projective subspace."""


class EmptyTarget(FurstlabError):
    """Distance to the projective space of the trivial subspace is undefined."""


class RangeError(FurstlabError):
    """Requested word positions fall outside the stored word."""


class DegenerateSpectrumError(FurstlabError):
    """Exponent grouping is order-ambiguous at the requested tolerance."""


class ResolutionError(FurstlabError):
    """Finite product cannot resolve the requested flag (singular gap too small)."""


class IntersectionError(FurstlabError):
    """Flag/fast-subspace intersection has the wrong dimension."""


class NonProximalError(FurstlabError):
    """Forward product has no usable attracting direction."""


class DimensionUnsupported(FurstlabError):
    """Operation only implemented for a specific ambient dimension."""


class InsufficientMass(FurstlabError):
    """Too few usable radii (or atoms) to fit a dimension estimate."""


class SlabTooThin(FurstlabError):
    """Rejection sampling acceptance rate fell below the feasibility floor."""


class DiagnosticsBlocked(FurstlabError):
    """Ensemble diagnostics failed and no override flag was given."""
