"""Exception types shared across the toolkit."""

from __future__ import annotations


class EdskitError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(EdskitError):
    """A request outside the supported configuration (degree caps, orders)."""


class EvaluationError(EdskitError):
    """A field evaluation failed at a concrete point."""


class SingularDenominatorError(EvaluationError):
    """Division (or a fractional power) hit a vanishing constant term."""


class DomainError(EvaluationError):
    """Evaluation left the admissible domain (negative radicand, bad sample set)."""


class SkewViolationError(EvaluationError):
    """A coefficient matrix that must be antisymmetric failed the pointwise check."""


class FlowDivergenceError(EvaluationError):
    """A flow step produced nonfinite intermediate values."""


class StepSizeError(EdskitError):
    """Richardson levels of a finite-difference derivative disagree too much."""


class IntegrationError(EdskitError):
    """Trajectory integration aborted; carries the last good step if known."""

    def __init__(self, message: str, last_step: int | None = None):
        super().__init__(message)
        self.last_step = last_step


class SchemaError(EdskitError):
    """A model or generator document violates the JSON schema or typing rules."""


class DslError(EdskitError):
    """Base class for field-expression language errors."""


class DslSyntaxError(DslError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DslNameError(DslError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{message} (line {line}, column {col})")
        self.line = line
        self.col = col


class DslTypeError(DslError):
    def __init__(self, message: str, line: int = 0, col: int = 0):
        if line or col:
            message = f"{message} (line {line}, column {col})"
        super().__init__(message)
        self.line = line
        self.col = col
