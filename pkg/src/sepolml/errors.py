"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: ``ConfigError`` -> 1, ``DataError`` -> 2,
``InvariantViolation`` -> 3.
"""


class SepolmlError(Exception):
    """Base class for every error raised by this package."""

    exit_code = 3


class ConfigError(SepolmlError):
    exit_code = 1


class DataError(SepolmlError):
    exit_code = 2


class InvariantViolation(SepolmlError):
    exit_code = 3


class StaleArtifact(DataError):
    """An upstream artifact is missing or no longer matches the run manifest."""

    def __init__(self, path, producer, reason="missing"):
        self.path = str(path)
        self.producer = producer
        self.reason = reason
        super().__init__(
            f"{reason} artifact {self.path}; run `sepolml {producer}` to produce it"
        )
