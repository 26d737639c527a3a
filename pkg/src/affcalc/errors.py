"""Exception hierarchy shared by all affcalc modules.

Two families matter to callers: :class:`InputError` for invalid
construction or configuration (CLI exit code 2, HTTP 422) and
:class:`NumericError` for computations that failed or degenerated
(CLI exit code 3, HTTP 409).
"""


class AffcalcError(Exception):
    """Base class for all library errors."""


class InputError(AffcalcError):
    """Invalid input, construction, or configuration."""


class NumericError(AffcalcError):
    """A computation failed, diverged, or degenerated."""


class NotAProbability(InputError):
    """Weights violate the probability-measure invariants."""


class BadParameter(InputError):
    """A scalar parameter is outside its admissible range."""


class EmptySample(InputError):
    """An empirical distribution was requested from no samples."""


class DomainMismatch(InputError):
    """A measure lies outside the domain a functional requires."""


class EvaluationFailure(NumericError):
    """A point evaluation raised or returned a non-finite value."""


class NonFiniteDerivative(NumericError):
    """A difference-quotient ladder diverged."""


class NoBracket(NumericError):
    """No sign change found at the current scan resolution."""


class NotViable(NumericError):
    """A solution correspondence returned the empty set."""


class ZeroMarginal(NumericError):
    """The observation has zero marginal likelihood under the prior."""


class DegenerateVariance(NumericError):
    """The influence-function variance is numerically zero."""


class NoConvergence(NumericError):
    """An iterative routine exhausted its iteration budget."""
