"""Exception hierarchy.

Errors split into two families so the command line can map them onto exit
codes: bad input (exit 2) and numerical failure (exit 3).
"""


class BayesExactError(Exception):
    """Base class for all package errors."""


class InputError(BayesExactError, ValueError):
    pass


class NumericError(BayesExactError, ArithmeticError):
    pass


class ParseError(InputError):
    pass


class NegativeCount(InputError):
    pass


class ShapeMismatch(InputError):
    pass


class EmptyTable(InputError):
    pass


class InconsistentMargins(InputError):
    pass


class NonPositivePrior(InputError):
    pass


class ObservedNotInSpace(InputError):
    pass


class UnsupportedCombination(InputError):
    pass


class ZeroRowMass(InputError):
    pass


class IndeterminateOddsRatio(NumericError):
    pass


class GammaUndefined(NumericError):
    pass


class DegenerateDraw(NumericError):
    pass


class AllZeroWeights(NumericError):
    pass


class EmptyNullEvent(NumericError):
    pass
