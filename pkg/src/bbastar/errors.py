from __future__ import annotations


class BbaError(RuntimeError):
    """Base class for every error raised by the workbench."""


class UnresolvedCallError(BbaError):
    pass


class UnguardedRecursionError(BbaError):
    pass


class ProbabilityError(BbaError, ValueError):
    pass


class LabelError(BbaError, ValueError):
    pass


class ConfigError(BbaError, ValueError):
    pass


class LimitExceeded(BbaError):
    def __init__(self, limit_name: str, limit: int) -> None:
        super().__init__(f"LimitExceeded({limit_name}): exploration exceeded {limit_name}={limit}")
        self.limit_name = limit_name
        self.limit = limit


class AutParseError(BbaError):
    def __init__(self, line_number: int, message: str) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class OracleScaleError(BbaError):
    pass


class StepCapExceeded(BbaError):
    def __init__(self, cap: int) -> None:
        super().__init__(f"round did not commit within {cap} sync steps")
        self.cap = cap


class RoundDeadlock(BbaError):
    def __init__(self, steps: int) -> None:
        super().__init__(f"round deadlocked after {steps} sync steps")
        self.steps = steps
