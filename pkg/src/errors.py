"""Error types raised by the checker.

Every error is a ValueError so callers that only care about "bad input"
can catch one thing; the CLI maps subclasses to exit codes.
"""


class CheckError(ValueError):
    """Base class for all checker errors."""


class FormulaSyntaxError(CheckError):
    """Formula text does not match the grammar."""

    def __init__(self, message: str, position: int, expected: frozenset[str]):
        self.position = position
        self.expected = expected
        wanted = ', '.join(sorted(expected)) if expected else 'end of input'
        super().__init__(f"{message} at position {position} (expected: {wanted})")


class UnknownAtom(CheckError):
    """Atom names a region or measurement the setup does not declare."""


class FormulaInvalid(CheckError):
    """Formula is well-formed text but outside the evaluable fragment."""


class NotRudimentary(CheckError):
    """A strict conditional or counterfactual reached a world-level evaluator."""


class CapacityError(CheckError):
    """An enumeration would exceed its configured bound."""


class DimensionError(CheckError):
    """Operator and state dimensions disagree."""


class PreconditionViolated(CheckError):
    """Inputs break an operation's stated precondition."""

    def __init__(self, message: str, deviation: float | None = None):
        self.deviation = deviation
        super().__init__(message)


class SolveFailure(CheckError):
    """Numerical search could not meet the Hardy constraints."""


class ConfigInvalid(CheckError):
    """Run configuration is malformed or describes an unusable model."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = f" (line {line}, column {column})" if line is not None else ''
        super().__init__(f"{message}{where}")


class SideConditionViolated(CheckError):
    """A lemma was instantiated with B inside the forward cone of C."""


class BadIndex(CheckError):
    """Proof line index out of range."""


class ShapeMismatch(CheckError):
    """Formula does not have the shape a transform expects."""


class SearchIncomplete(CheckError):
    """Constraint search could not cover the whole candidate space."""


class EmptyStart(CheckError):
    """No positive-weight history leaf matches a path-tracing start."""


class IdentityViolated(CheckError):
    """Two formulations of the same set identity disagreed."""
