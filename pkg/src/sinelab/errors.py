"""Exception types shared across the package."""


class SinelabError(Exception):
    """Base class for all package-specific errors."""


class NonFinite(SinelabError):
    """A quadrature failed to converge or produced a non-finite value."""


class SupportExceedsWindow(SinelabError):
    """The support of a test function is not contained in the observation window."""


class OutOfWindow(SinelabError):
    """An interval reaches outside the observation window of a configuration."""


class EndpointSingularity(SinelabError):
    """Evaluation requested too close to an inverse-square-root singularity."""


class ScaleSeparationViolated(SinelabError):
    """The (ell, lambda) pair violates the required scale separation."""


class CoincidentPoints(SinelabError):
    """Two atoms coincide, making the logarithmic pair energy infinite."""


class RootNotBracketed(SinelabError):
    """Internal inversion failure: the monotone bracket does not contain a root."""


class InsufficientBulk(SinelabError):
    """Too few eigenvalues in the central window to build a bulk sample."""


class TruncationExceedsWindow(SinelabError):
    """The requested truncation radius exceeds the exterior sample window."""
