"""Exception types shared across the package."""


class LpaError(Exception):
    """Base class for all lpakit errors."""


class GraphFormatError(LpaError):
    """A graph file could not be parsed."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {message}" if where else message)


class ValidationError(LpaError, ValueError):
    """Input violates a documented contract (bad weight, id overflow, ...)."""


class NoTableError(LpaError, ValueError):
    """A vertex of degree 0 has no hashtable region."""


class InvariantViolation(LpaError, RuntimeError):
    """An internal invariant was broken, e.g. a hashtable ran out of slots."""
