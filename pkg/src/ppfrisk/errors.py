"""Exception hierarchy. Each category maps to a CLI exit code."""


class PPFRiskError(Exception):
    exit_code = 1


class ConfigError(PPFRiskError, ValueError):
    """Invalid configuration: names the offending key and the violated constraint."""

    exit_code = 2

    def __init__(self, key: str, constraint: str):
        self.key = key
        self.constraint = constraint
        super().__init__(f"{key}: {constraint}")


class DomainError(PPFRiskError, ValueError):
    exit_code = 3


class DataError(PPFRiskError, ValueError):
    exit_code = 4


class PreconditionError(PPFRiskError, ValueError):
    exit_code = 5


class ConsistencyError(PPFRiskError, ArithmeticError):
    exit_code = 6


class UsageError(PPFRiskError, TypeError):
    exit_code = 7


class OutputError(PPFRiskError, OSError):
    exit_code = 8
