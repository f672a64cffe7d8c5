"""Exception hierarchy shared by the library and the CLI."""


class BeamPinnError(Exception):
    """Base class for all package errors."""


class ConfigurationError(BeamPinnError, ValueError):
    """Invalid or unsupported configuration (bad order, nonzero damping, unknown key...)."""


class UsageError(BeamPinnError, ValueError):
    """An operation was called with arguments outside its contract."""


class UndefinedMetricError(UsageError):
    """The requested metric is undefined for the given inputs (e.g. all-zero reference)."""


class EvaluationError(BeamPinnError, ArithmeticError):
    """A network or field evaluation produced non-finite values."""


class StabilityError(ConfigurationError):
    """Time step too large for the explicit integrator."""


class TrainingError(BeamPinnError, RuntimeError):
    """Training diverged (non-finite loss or gradient)."""

    def __init__(self, message: str, epoch: int | None = None):
        super().__init__(message if epoch is None else f"epoch {epoch}: {message}")
        self.epoch = epoch
