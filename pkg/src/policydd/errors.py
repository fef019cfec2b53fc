"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: validation problems exit 1, exhausted
budgets exit 2, broken internal invariants exit 3.
"""


class PolicyDDError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(PolicyDDError, ValueError):
    """Input does not satisfy a schema or type invariant."""


class SchemaError(ValidationError):
    """A packet or rule does not conform to the field schema."""


class PolicySyntaxError(ValidationError):
    """Malformed policy text. Carries 1-based line and column."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + message)


class ResourceBudgetExceeded(PolicyDDError):
    """A configured node, time or size budget ran out."""

    def __init__(self, message, best_known=None):
        super().__init__(message)
        self.best_known = best_known


class PartitionCapExceeded(ResourceBudgetExceeded):
    """Singleton count is above the partition enumeration cap."""


class InvariantViolation(PolicyDDError, AssertionError):
    """An internal consistency check failed (a bug or a bound violation)."""

    def __init__(self, message, replay=None):
        super().__init__(message)
        self.replay = replay
