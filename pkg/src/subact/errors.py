"""Exception hierarchy shared by every subpackage."""


class SubactError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SubactError, ValueError):
    pass


class ConfigError(SubactError, ValueError):
    pass


class NumericError(SubactError, FloatingPointError):
    pass


class ContractError(SubactError, ValueError):
    pass


class CapacityError(SubactError, ValueError):
    pass


class InputError(SubactError, ValueError):
    pass


class LabelLookupError(SubactError, KeyError):
    def __str__(self) -> str:
        # KeyError quotes its argument; keep the message readable
        return str(self.args[0]) if self.args else ""


class ParseError(SubactError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class ValidationError(SubactError, ValueError):
    pass


class UndefinedMetricError(SubactError, ValueError):
    pass


class CompatibilityError(SubactError, ValueError):
    pass


class UnsupportedVariantError(SubactError, ValueError):
    pass


class TrainingDivergedError(SubactError, FloatingPointError):
    def __init__(self, message: str, op: str | None = None):
        self.op = op
        super().__init__(message)
