"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """An invalid parameter set, scenario or scenario file."""


class NumericFailure(ArithmeticError):
    """Plant integration produced a non-finite value."""

    def __init__(self, message, state=None, sample=None):
        super().__init__(message)
        self.state = state
        self.sample = sample


class IdentificationError(RuntimeError):
    """Relay experiment did not reach a sustained oscillation."""


class TuningError(RuntimeError):
    """The autotuner could not evaluate its starting point."""
