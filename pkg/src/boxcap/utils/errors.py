"""
Exception types for boxcap.

Every error raised on purpose by the package derives from BoxcapError so the
command-line entry point can report it and exit cleanly.
"""


class BoxcapError(Exception):
    """Base class for boxcap errors."""


class DatasetError(BoxcapError, ValueError):
    """A dataset record failed to parse or validate."""

    def __init__(self, message, line=None, field=None):
        self.line = line
        self.field = field
        prefix = f"line {line}: " if line is not None else ""
        if field is not None:
            prefix += f"field '{field}': "
        super().__init__(prefix + message)


class ConfigError(BoxcapError, ValueError):
    """A configuration file or value is invalid."""


class CheckpointError(BoxcapError):
    """A checkpoint cannot be read or does not match its configuration."""


class NonFiniteError(BoxcapError, FloatingPointError):
    """A NaN or infinity appeared in activations or losses."""


class MetricError(BoxcapError, ValueError):
    """A metric was asked to score an empty or malformed corpus."""
