class CameError(Exception):
    """Base class for every error the CLI maps to an exit code."""

    exit_code = 4


class UsageError(CameError):
    exit_code = 1


class ConfigError(CameError):
    exit_code = 1


class DataError(CameError):
    exit_code = 2


class TensorFileError(DataError):
    pass


class BadMagicError(TensorFileError):
    pass


class TruncatedPayloadError(TensorFileError):
    pass


class UnsupportedFormatError(TensorFileError):
    pass


class SplitError(DataError):
    pass


class CheckpointError(DataError):
    pass


class NumericError(CameError):
    exit_code = 3


class NonFiniteLossError(NumericError):
    def __init__(self, component: str, value: float, epoch: int | None = None) -> None:
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"loss component {component!r} is non-finite ({value}){where}")
        self.component = component
        self.value = value
        self.epoch = epoch


class NonFiniteGradientError(NumericError):
    def __init__(self, parameter: str, epoch: int | None = None) -> None:
        where = f" at epoch {epoch}" if epoch is not None else ""
        super().__init__(f"gradient of parameter {parameter!r} is non-finite{where}")
        self.parameter = parameter
        self.epoch = epoch


class GradCheckFailure(NumericError):
    pass
