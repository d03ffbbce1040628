"""Exception hierarchy shared across the library.

Exit-code mapping used by the CLI: configuration problems -> 2,
numerical failures -> 3, resource limits -> 4.
"""


class HelmrankError(Exception):
    """Base class for all library errors."""


class ParameterError(HelmrankError, ValueError):
    """A constructor or operation received an invalid parameter."""


class SamplingError(HelmrankError):
    """A sampled field returned a non-finite value at a grid node."""

    def __init__(self, index, value):
        self.index = tuple(index)
        self.value = value
        super().__init__(
            f"non-finite field value {value!r} at grid index {self.index}"
        )


class SingularSystemError(HelmrankError):
    """A direct solve hit a numerically singular matrix."""

    def __init__(self, message, pivot=None):
        self.pivot = pivot
        if pivot is not None:
            message = f"{message} (smallest pivot magnitude {pivot:.3e})"
        super().__init__(message)


class BandStructureError(HelmrankError):
    """An entry outside the declared band was written during assembly."""


class ResourceLimitError(HelmrankError):
    """A dense or full-grid operation exceeded its configured size cap."""


class ConfigError(HelmrankError):
    """An experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"config field '{field}': {message}")
