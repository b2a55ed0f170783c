"""Exception types shared across modules."""


class ConfigError(ValueError):
    """A model or training configuration is invalid or cannot be parsed."""


class DataError(ValueError):
    """A dataset file or basket record is malformed."""


class CheckpointError(RuntimeError):
    """A checkpoint file is corrupt, truncated, or of the wrong version."""
