"""Error types shared across the toolkit."""


class InvalidInputError(ValueError):
    """Input violates a precondition (non-finite values, bad range, ...)."""


class ShapeMismatchError(InvalidInputError):
    """Arrays that must share a shape do not."""


class MalformedFileError(ValueError):
    """A file on disk does not parse as the expected format."""


class CheckpointError(MalformedFileError):
    """A checkpoint is unreadable or inconsistent with the requested config."""


class UndefinedMetricError(ValueError):
    """A metric is mathematically undefined for the given inputs."""


class TrainingDivergedError(RuntimeError):
    """A loss became non-finite during training."""
