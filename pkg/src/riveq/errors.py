"""Exception hierarchy.

Every error carries a short ``code`` string so the command line can map it
to an exit status: validation problems exit with 2, numerical ones with 3.
"""


class RiveqError(Exception):
    code = "riveq-error"
    exit_status = 3


class ValidationError(RiveqError, ValueError):
    code = "validation"
    exit_status = 2


class NumericalError(RiveqError, ArithmeticError):
    code = "numerical"
    exit_status = 3


class DomainViolation(ValidationError):
    code = "domain-violation"


class AdmissibilityFailure(ValidationError):
    code = "admissibility-failure"

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PreconditionViolation(ValidationError):
    code = "precondition-violation"


class OutOfRange(ValidationError):
    code = "out-of-range"


class MalformedTransition(ValidationError):
    code = "malformed-transition"


class MalformedCurve(ValidationError):
    code = "malformed-curve"


class FileIOError(ValidationError):
    code = "file-io"


class JumpConditionViolation(ValidationError):
    code = "jump-condition-violation"


class InitialConditionViolation(ValidationError):
    code = "initial-condition-violation"


class ConfigParseError(ValidationError):
    code = "config-parse"


class NonFiniteValue(NumericalError):
    code = "non-finite-value"


class BracketOverflow(NumericalError):
    code = "bracket-overflow"


class BudgetExhausted(NumericalError):
    code = "budget-exhausted"

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class ChainDivergence(NumericalError):
    code = "chain-divergence"


class NonConvergence(NumericalError):
    code = "non-convergence"

    def __init__(self, message, curve=None):
        super().__init__(message)
        self.curve = curve
