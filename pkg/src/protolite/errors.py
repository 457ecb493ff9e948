"""Exception types shared across the toolchain."""

from __future__ import annotations


class LangError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(LangError):
    """Source text does not conform to the concrete grammar."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class ReservedSelectorError(ParseError):
    """An identifier in source uses the reserved '__' prefix."""


class UnknownClassError(LangError):
    """A class name does not exist in the program or image."""


class UnknownFieldError(LangError):
    """A field name is not declared in the enclosing class or its ancestors."""

    def __init__(self, class_name: str, field: str):
        super().__init__(f"unknown field '{field}' in class {class_name}")
        self.class_name = class_name
        self.field = field


class AlreadyMangledError(LangError):
    """Attempt to mangle a selector that already carries the prefix."""


class ProgramInvalidError(LangError):
    """Compilation was attempted on a program that fails validation."""

    def __init__(self, violations):
        lines = "; ".join(str(v) for v in violations)
        super().__init__(f"invalid program: {lines}")
        self.violations = list(violations)


class BenchConfigError(LangError):
    """Benchmark was requested with unusable parameters or workload."""
