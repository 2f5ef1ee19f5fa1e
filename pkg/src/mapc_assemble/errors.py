from __future__ import annotations


class ContractViolation(RuntimeError):
    """An operation was called outside its precondition."""


class ConfigError(ValueError):
    """Invalid match or world configuration."""


class MapParseError(ConfigError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class ShapeMismatch(ValueError):
    """Attachments cannot be rotated into the requested shape."""
