"""Exception hierarchy shared across the package."""

from __future__ import annotations


class GeosensError(Exception):
    """Base class for all package errors."""


class InvalidPoint(GeosensError, ValueError):
    """A point violates the invariants of its manifold."""


class NumericalFailure(GeosensError, ArithmeticError):
    """A matrix function (eigendecomposition) failed or produced non-finite values."""


class AntipodalPoints(GeosensError):
    """Two sphere points are antipodal, so the minimizing geodesic is not unique."""


class IncompatibleIsometry(GeosensError, TypeError):
    """An isometry was applied to a manifold it does not act on."""


class DegenerateInput(GeosensError, ValueError):
    """A model was evaluated outside the support where its output is defined."""


class SamplingStalled(GeosensError):
    """Rejection sampling exceeded its redraw cap."""


class InvalidNu(GeosensError, ValueError):
    """The frozen index set is empty, out of range, or covers every input."""


class TooFewSamples(GeosensError, ValueError):
    """Fewer than two pairs or two pool points were supplied."""


class TooLarge(GeosensError, ValueError):
    """An oracle was asked to enumerate or loop over too many terms."""


class GridTooLarge(TooLarge):
    """A discrete model has more grid cells than the enumeration oracle accepts."""


class DegenerateBalls(GeosensError):
    """Every pool pair was dropped because its geodesic is not unique."""


class DegenerateDenominator(GeosensError):
    """The variance normalizer is zero, so the normalized index is undefined.

    The numerator and denominator that triggered the error are kept on the
    exception for reporting.
    """

    def __init__(self, message: str, s_hat: float = 0.0, d_hat: float = 0.0):
        super().__init__(message)
        self.s_hat = s_hat
        self.d_hat = d_hat


class TooFewValidReplicates(GeosensError):
    """Less than half of the bootstrap replicates produced a finite index."""


class ConfigError(GeosensError, ValueError):
    """An experiment configuration is missing keys or holds invalid values."""
