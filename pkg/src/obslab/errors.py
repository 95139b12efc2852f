"""Exception types shared across the package."""


class ObslabError(Exception):
    """Base class for package-specific failures."""


class UnstableSystemError(ObslabError):
    """A closed loop has spectral radius >= 1 where a stable one is required."""


class TrainingDivergedError(ObslabError):
    """Gradient descent produced a non-finite cost.

    Carries the trace collected up to the point of divergence.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []


class ConsistencyError(ObslabError):
    """Two independent computations of the same quantity disagree."""


class ConfigError(ObslabError):
    """Experiment configuration is missing, malformed, or invalid."""


class IngestionError(ObslabError):
    """An input data file (weight stack, decision records) is malformed."""
