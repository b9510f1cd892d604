"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
DivergenceError -> 4.
"""


class LayerlensError(Exception):
    pass


class ConfigError(LayerlensError):
    """Invalid experiment configuration or command arguments."""


class DataError(LayerlensError):
    """Unreadable, malformed, or inconsistent input data."""


class FormatError(DataError):
    """File does not match the expected on-disk format (bad magic, bad record)."""


class ConsistencyError(DataError):
    """Structurally valid files that disagree with each other (e.g. image/label counts)."""


class CapacityError(LayerlensError):
    """Model too large for exact enumeration."""


class DivergenceError(LayerlensError):
    """Training produced non-finite or runaway parameters."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class FitError(LayerlensError):
    """Spectrum has too little structure to fit a power law."""


class LabelerError(LayerlensError):
    """Labeler failed its validation-error quality gate."""

    def __init__(self, message, error_rate=None):
        super().__init__(message)
        self.error_rate = error_rate
