"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 2, resource budget
overruns exit 3, failed verifications exit 4.
"""


class PowersLabError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class UsageError(PowersLabError, ValueError):
    """Bad arguments: mismatched groups, invalid exponents, malformed text."""

    exit_code = 2


class BudgetExceeded(PowersLabError, RuntimeError):
    """A configured element or term budget would be exceeded."""

    exit_code = 3

    def __init__(self, what: str, needed: int, budget: int):
        self.what = what
        self.needed = needed
        self.budget = budget
        super().__init__(f"{what}: needs {needed} but budget is {budget} (set POWERS_LAB_BUDGET to raise it)")


class InvalidFunction(PowersLabError, ValueError):
    """An Orlicz-type function failed its monotonicity or convexity checks."""

    exit_code = 2


class ConstructionFailure(PowersLabError, RuntimeError):
    """A numerical construction could not be completed or verified."""

    exit_code = 4

    def __init__(self, stage: str, message: str, margin: float | None = None):
        self.stage = stage
        self.margin = margin
        text = f"[{stage}] {message}"
        if margin is not None:
            text += f" (best margin {margin:.3e})"
        super().__init__(text)


class DomainError(PowersLabError, ValueError):
    """Evaluation outside the range where a truncated construction is defined."""

    exit_code = 2


class VerificationFailure(PowersLabError, AssertionError):
    """A numerical check that was asked to pass did not."""

    exit_code = 4
