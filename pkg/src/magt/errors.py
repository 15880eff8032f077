"""Exception hierarchy shared by all modules."""


class GameError(ValueError):
    """An argument lies outside the domain of an operation."""


class ParseError(GameError):
    """A document could not be parsed."""

    def __init__(self, message, line=None, field=None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.line = line
        self.field = field


class ValidationError(GameError):
    """A parsed document violates a structural invariant."""


class ConfigError(GameError):
    """An experiment or roster configuration is inconsistent."""


class PreconditionError(GameError):
    """An operation was called on a state that does not meet its precondition."""


class UnsupportedInstance(GameError):
    """The instance is valid but outside what the solver handles."""


class DynamicsDomainError(GameError):
    """A dynamics step would leave its domain (e.g. negative population counts)."""
