"""Exception hierarchy shared across the package."""


class MuseError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(MuseError):
    """Invalid configuration or usage (bad flag combination, empty vocabulary, ...)."""


class FormatError(MuseError):
    """Malformed or truncated data file (model container, dataset files)."""


class TrainingError(MuseError):
    """Training failure such as a non-finite parameter or reward."""
