"""Exception types shared across the package."""


class LightBeamError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(LightBeamError):
    """A file does not conform to its expected on-disk format."""


class ShapeError(LightBeamError):
    """Array dimensions disagree with the paired component."""


class DataValueError(LightBeamError):
    """A loaded value is out of domain (NaN, inf, negative count, ...)."""


class ConfigError(LightBeamError):
    """Invalid decoding configuration."""


class ScorerError(LightBeamError):
    """Transport or protocol failure talking to an external scorer."""

    def __init__(self, message: str, request_id: int | None = None):
        super().__init__(message)
        self.request_id = request_id


class EmptyBeamError(LightBeamError):
    """Every hypothesis was pruned; the search cannot continue."""


class MetricError(LightBeamError):
    """Invalid input to a metric computation."""


class InstanceTooLargeError(LightBeamError):
    """Exhaustive reference decoding was asked for an intractable instance."""


class BuilderError(LightBeamError):
    """Inconsistent specification passed to a fixture builder."""
