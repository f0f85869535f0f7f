"""Exception hierarchy.

Validation errors (bad inputs, violated model assumptions) and numerical
errors (failed brackets, broken identities) are kept apart so the CLI can map
them to distinct exit codes.
"""


class CreepDivError(Exception):
    pass


class ValidationError(CreepDivError, ValueError):
    pass


class NumericalError(CreepDivError, ArithmeticError):
    pass


class ModelError(ValidationError):
    pass


class InvalidConfig(ValidationError):
    pass


class ExpSumError(NumericalError):
    pass


class DivergentIntegral(NumericalError):
    pass


class PoleEvaluation(NumericalError):
    pass


class RootIsolationFailure(NumericalError):
    pass


class BoundaryMismatch(NumericalError):
    pass


class BracketFailure(NumericalError):
    pass


class HJBViolation(NumericalError):
    def __init__(self, message, points=()):
        super().__init__(message)
        self.points = list(points)
