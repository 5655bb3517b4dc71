"""Exception types shared across the package."""


class PlacelinkError(Exception):
    """Base class for all placelink errors."""


class ConfigError(PlacelinkError):
    """Invalid configuration value or argument."""


class LoadError(PlacelinkError):
    """Malformed input file; carries the offending path and line number."""

    def __init__(self, path, line, message):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


class StateError(PlacelinkError):
    """Annotation-workflow request that the current state cannot honor."""


class UnknownPairError(StateError):
    """Pair id not present in the candidate pool."""


class AlreadyLabeledError(StateError):
    """Pair already carries a label; labels are write-once."""
