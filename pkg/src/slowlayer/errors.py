"""Exception types shared across the package."""


class SlowLayerError(Exception):
    """Base class. ``category`` is the machine-readable tag reported by the CLI."""

    category = "numerical"


class DomainError(SlowLayerError, ValueError):
    category = "domain"


class NoJumpError(DomainError):
    """Flux level does not exceed the minimum flux, so no stationary jump exists."""


class DegenerateJumpError(DomainError):
    """Flux level equals the minimum flux: the two end states merge."""


class SingularIntegrandError(DomainError):
    pass


class DivergenceError(SlowLayerError):
    """Flux level blows up (layer position at the boundary)."""


class ResolutionError(SlowLayerError):
    category = "resolution"


class DegenerateEigenfunctionError(SlowLayerError):
    pass


class TrackingError(SlowLayerError):
    category = "tracking"


class PositivityError(SlowLayerError):
    category = "positivity"


class ConfigError(SlowLayerError, ValueError):
    category = "schema"

    def __init__(self, msg, keys=None):
        super().__init__(msg)
        self.keys = list(keys or [])
