"""Semantic exception hierarchy for nsflow.

Every error raised by the library derives from :class:`NsflowError`, so
callers can catch domain failures without masking programming errors.
"""


class NsflowError(Exception):
    """Base class for all nsflow domain errors."""


class RankDeficient(NsflowError):
    """Surface normals are linearly dependent; remove redundant surfaces."""


class NotEventSelected(NsflowError):
    """Transversality fails: some corner field limit does not cross a surface
    forward fast enough (min normal-dot below the declared floor), so sliding
    or branching is possible and the corner algorithms do not apply."""


class DegenerateDenominator(NsflowError):
    """A crossing-rate denominator was non-positive mid-computation.

    Unreachable on validated models; signals inconsistent input data."""


class CapExceeded(NsflowError):
    """An exponential-size representation was refused (vertex/permutation cap)."""


class TangentialCrossing(NsflowError):
    """A trajectory met an event surface with near-zero normal speed."""


class StepTooLarge(NsflowError):
    """Event localization failed inside one integration step; reduce the step."""


class SingularMass(NsflowError):
    """Mass matrix factorization failed (not symmetric positive definite)."""


class InvalidDelta(NsflowError):
    """Piecewise-constant offset table has a component at or below -1."""
