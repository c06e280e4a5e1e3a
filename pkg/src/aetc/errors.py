"""Exception hierarchy; each maps to a CLI exit code."""


class AetcError(Exception):
    exit_code = 1


class ConfigError(AetcError, ValueError):
    exit_code = 2


class InfeasibleBudgetError(AetcError, ValueError):
    exit_code = 3


class NumericalFailure(AetcError, ArithmeticError):
    exit_code = 4


class SamplingError(AetcError, RuntimeError):
    """A user-supplied sampler raised while producing draw ``index``."""

    exit_code = 4

    def __init__(self, index: int, cause: BaseException):
        super().__init__(f"sampler failed at draw {index}: {cause!r}")
        self.index = index
        self.cause = cause
