"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    pass


class InvalidAngleError(InvalidInputError):
    pass


class ModelConfigError(ValueError):
    pass


class ConfigError(ValueError):
    """Bad estimator name, scenario schema or run configuration."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class TrainingDivergedError(RuntimeError):
    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}: non-finite loss")


class NoEstimateError(LookupError):
    """The temporal gate was asked for an estimate with an empty window."""
