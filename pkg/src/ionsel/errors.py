"""Exception types shared across the package."""


class IonselError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(IonselError):
    """Operands live on different or incompatible spaces."""


class TruncationError(IonselError):
    """A truncated-space operation would lose more norm than tolerated."""


class ZeroProbability(IonselError):
    """A conditional state was requested for an outcome of ~zero probability."""


class StepFailure(IonselError):
    """The adaptive integrator could not meet its accuracy contract."""


class Infeasible(IonselError):
    """No parameter set satisfies the requested design constraints."""


class ConfigError(IonselError):
    """A run configuration failed schema validation."""
