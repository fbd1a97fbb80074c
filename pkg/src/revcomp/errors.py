"""Exception types shared across the package."""


class RevcompError(Exception):
    """Base class for all package errors."""


class InvalidProfileError(RevcompError, ValueError):
    """A warping profile violates a construction invariant."""


class IntegrationError(RevcompError, RuntimeError):
    """Geodesic integration failed; carries diagnostic state."""

    def __init__(self, message, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class BisectionError(RevcompError, RuntimeError):
    """A bracketed root search failed to converge; carries the bracket."""

    def __init__(self, message, **bracket):
        super().__init__(message)
        self.bracket = bracket


class TriangleDomainError(RevcompError, ValueError):
    """Triangle sides lie outside the admissible set for the surface."""


class ComparisonFalsification(RevcompError):
    """A comparison triangle with matching sides could not be built.

    Raised only when the side-matching system is unsatisfiable, which
    would falsify the comparison inequality for the surface pair under
    test.  Callers running sampled suites should record it, not crash.
    """
