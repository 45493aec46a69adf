"""Exception hierarchy.

Validation problems derive from ``ValueError`` and numerical failures from
``ArithmeticError`` so callers (and the CLI exit codes) can tell them apart
without importing every class.
"""


class OstrowskiError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(OstrowskiError, ValueError):
    pass


class AdmissibilityError(ValidationError):
    """A digit word breaks the range or Markov rule.

    ``index`` is 1-based and points at the first offending pair.
    """

    def __init__(self, message, index=None, rule=None):
        super().__init__(message)
        self.index = index
        self.rule = rule


class NumericalError(OstrowskiError, ArithmeticError):
    pass


class ContinuantOverflowError(NumericalError, OverflowError):
    def __init__(self, depth, bits):
        super().__init__(f"continuant exceeds {bits} bits at depth {depth}")
        self.depth = depth
        self.bits = bits


class ConvergenceError(NumericalError):
    pass


class PositivityError(NumericalError):
    pass


class BracketError(NumericalError):
    pass
