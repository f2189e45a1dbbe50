"""Exception hierarchy shared across the toolchain."""

from __future__ import annotations


class ParseError(SyntaxError):
    """Malformed input, with a character offset into the source text."""

    def __init__(self, message: str, pos: int = 0, text: str = ""):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        super().__init__(message, ("<input>", line, col, text))
        self.message = message
        self.pos = pos

    def __str__(self) -> str:
        return f"{self.message} at offset {self.pos}"


class UnsupportedSyntax(ParseError):
    """Valid source, but outside the type grammar subset we handle."""


class RewriteError(Exception):
    def __init__(self, operator: str, reason: str, location: tuple[int, int] | None = None):
        if not reason:
            raise ValueError("RewriteError needs a reason")
        super().__init__(f"{operator}: {reason}")
        self.operator = operator
        self.reason = reason
        self.location = location


class MissingDeps(LookupError):
    def __init__(self, names):
        self.names = list(names)
        super().__init__("unresolved dependencies: " + ", ".join(self.names))


class DanglingConstraintVariable(ValueError):
    pass


class PlaceholderUnfillable(ValueError):
    pass


class ArityConflict(UserWarning):
    pass


class EmptyReport(ValueError):
    pass


class UndefinedDelta(ZeroDivisionError):
    pass


class EndpointUnreachable(ConnectionError):
    pass
