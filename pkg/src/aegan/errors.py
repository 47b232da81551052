"""Exception hierarchy shared across the package.

Every error a caller can act on derives from :class:`AeganError`.  The CLI
maps the concrete subclasses onto its exit-code contract: configuration
problems exit 2, data problems exit 3, and a numerical abort during
training exits 4.
"""


class AeganError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(AeganError):
    """A spec, config file, or hyperparameter value is inconsistent."""


class ShapeError(AeganError):
    """An input batch does not match the configured shape."""


class DataError(AeganError):
    """A dataset source is missing, empty, or contains invalid values."""


class UsageError(AeganError):
    """An operation was called with degenerate arguments (empty batch, etc.)."""


class NumericalAbort(AeganError):
    """Training produced a non-finite loss and was stopped.

    Carries the name of the first non-finite loss component and the step
    at which it appeared.
    """

    def __init__(self, component, step):
        self.component = component
        self.step = step
        super().__init__(
            f"non-finite loss component '{component}' at step {step}; "
            "training aborted"
        )
