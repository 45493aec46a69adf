"""Ostrowski skew-product map: expansions, geometry, spectra, dimension bounds and simulation."""

from .errors import (
    AdmissibilityError,
    BracketError,
    ContinuantOverflowError,
    ConvergenceError,
    NumericalError,
    OstrowskiError,
    PositivityError,
    ValidationError,
)
from .numeration import DigitPair, DigitWord, expand, validate

__version__ = "0.1.0"

__all__ = [
    "AdmissibilityError",
    "BracketError",
    "ContinuantOverflowError",
    "ConvergenceError",
    "DigitPair",
    "DigitWord",
    "NumericalError",
    "OstrowskiError",
    "PositivityError",
    "ValidationError",
    "expand",
    "validate",
]
