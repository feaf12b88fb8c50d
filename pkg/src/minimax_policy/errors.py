"""Exception hierarchy.

Validation problems derive from :class:`ValidationError` (also a
``ValueError``); numerical failures derive from :class:`SolverError`. The
command-line front end maps the first family to exit code 2 and the second
to exit code 3.
"""


class MinimaxPolicyError(Exception):
    """Base class for all package errors."""


class ValidationError(MinimaxPolicyError, ValueError):
    """Input violates a documented precondition."""


class SolverError(MinimaxPolicyError, ArithmeticError):
    """A numerical routine failed to produce a certified answer."""


# --- validation -----------------------------------------------------------

class InvalidSpec(ValidationError):
    pass


class NoAffectedUnits(ValidationError):
    pass


class InconsistentTreatment(ValidationError):
    pass


class DuplicateRunningVariable(ValidationError):
    pass


class InvalidEpsilon(ValidationError):
    pass


class InvalidInterval(ValidationError):
    pass


class DimensionMismatch(ValidationError):
    pass


class RankDeficientDesign(ValidationError):
    pass


class DegreeTooHigh(ValidationError):
    pass


class TooFewUnits(ValidationError):
    pass


class InsufficientLocalData(ValidationError):
    pass


class MissingColumn(ValidationError):
    pass


class EmptyFile(ValidationError):
    pass


class BadRow(ValidationError):
    """A CSV row could not be parsed; ``line`` is the 1-based file line."""

    def __init__(self, line: int, reason: str = ""):
        self.line = line
        msg = f"bad row at line {line}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class NotApplicable(ValidationError):
    """The requested quantity is undefined for this rule or problem."""


class RandomizedRule(NotApplicable):
    pass


class FlatModulus(ValidationError):
    """The modulus has zero slope at the origin, so the data carry no signal."""


class DegenerateDirection(ValidationError):
    pass


# --- numerical -------------------------------------------------------------

class SolverDiverged(SolverError):
    """Iteration cap reached without meeting tolerance.

    Attributes
    ----------
    best : ndarray or None
        Best iterate found.
    residuals : dict
        Primal and dual residuals at ``best``.
    """

    def __init__(self, message, best=None, residuals=None):
        super().__init__(message)
        self.best = best
        self.residuals = residuals or {}


class BracketFailure(SolverError):
    pass


class NonUnimodal(SolverError):
    pass


class Infeasible(SolverError):
    pass


class Unbounded(SolverError):
    pass
