"""Exception hierarchy.

Every error carries an ``exit_code`` used by the command-line front end:
2 for invalid input, 3 for an exhausted computational budget.
"""


class SinglabError(Exception):
    exit_code = 1

    def to_dict(self):
        return {"error": type(self).__name__, "message": str(self)}


class ValidationError(SinglabError, ValueError):
    exit_code = 2


class BudgetExceeded(SinglabError):
    exit_code = 3


# weights
class NotSorted(ValidationError):
    pass


class NotNormalized(ValidationError):
    pass


class NonPositiveEntry(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class IndexOutOfRange(ValidationError):
    pass


# exterior algebra
class DimensionMismatch(ValidationError):
    pass


class GradeOutOfRange(ValidationError):
    pass


# lattices
class NotUnimodular(ValidationError):
    pass


class NumericalInstability(SinglabError):
    exit_code = 3


class RankDeficient(ValidationError):
    pass


class NotPrimitive(ValidationError):
    pass


class RadiusOverflow(BudgetExceeded):
    pass


# fractals
class BadSymbol(ValidationError):
    pass


class OSCViolation(ValidationError):
    pass


class ROutOfXi(ValidationError):
    pass


# diophantine
class BoxTooLarge(BudgetExceeded):
    pass


class GridMismatch(ValidationError):
    pass


class InvalidWitness(ValidationError):
    pass


# exponents
class InsufficientMass(BudgetExceeded):
    pass


class RhoOutOfRange(ValidationError):
    pass


class InfeasibleZeta(ValidationError):
    pass


# height functions
class AlphaNonPositive(ValidationError):
    pass


class TTooSmall(ValidationError):
    pass


# bounds
class InfeasibleProfile(ValidationError):
    pass


class NegativeOmega(ValidationError):
    pass


class POutOfRange(ValidationError):
    pass


class GammaOutOfRange(ValidationError):
    pass


# box counting
class DegenerateCounts(ValidationError):
    pass
