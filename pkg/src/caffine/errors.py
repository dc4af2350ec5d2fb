"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures without a lookup table:

* 1 -- the input is well formed but violates a structural expectation
* 2 -- the input itself is invalid
* 3 -- a numerical procedure failed
"""


class CaffineError(Exception):
    exit_code = 3

    def __init__(self, message, location=None):
        super().__init__(message)
        self.message = message
        self.location = location

    def to_dict(self):
        return {
            "code": type(self).__name__,
            "message": self.message,
            "location": self.location,
        }


# invalid input (exit 2)

class InvalidInput(CaffineError):
    exit_code = 2


class ExprSyntaxError(InvalidInput):
    def __init__(self, message, position):
        super().__init__(f"{message} at position {position}", location=position)
        self.position = position


class UnknownIdentifier(InvalidInput):
    pass


class DomainError(InvalidInput):
    pass


class OrderExceeded(InvalidInput):
    pass


class InvalidParameters(InvalidInput):
    pass


class InvalidLambda(InvalidParameters):
    pass


# numerical failures (exit 3)

class NumericalFailure(CaffineError):
    pass


class NonConvergence(NumericalFailure):
    pass


class RankDeficient(NumericalFailure):
    pass


class AsymmetryError(NumericalFailure):
    pass


class DegenerateFrame(NumericalFailure):
    pass


class DegenerateMetric(NumericalFailure):
    pass


class CrossCheckFailure(NumericalFailure):
    pass


class ZeroCubic(NumericalFailure):
    pass


# structural violations (exit 1)

class StructureViolation(CaffineError):
    exit_code = 1


class BranchAmbiguity(StructureViolation):
    pass


class IsotropyViolation(StructureViolation):
    pass


class SpectrumViolation(StructureViolation):
    pass


class ForbiddenP(StructureViolation):
    pass


class BlockMismatch(StructureViolation):
    pass


class StructureInvalid(StructureViolation):
    pass
