"""Exception hierarchy shared by all mflab modules."""


class MflabError(Exception):
    """Base class for all errors raised by mflab."""


class InvalidArgumentError(MflabError, ValueError):
    """An argument violates a documented precondition."""


class ResourceLimitError(MflabError):
    """A requested size exceeds a configured cap."""


class DegenerateInputError(MflabError, ValueError):
    """Input vectors are linearly dependent beyond tolerance."""


class UnsupportedError(MflabError):
    """The operation is not defined for this configuration."""


class InternalConsistencyError(MflabError):
    """Two independent evaluation routes disagree."""


class PropagationError(MflabError):
    """The Krylov propagator failed to converge."""

    def __init__(self, message, *, time=None, diagnostics=None):
        super().__init__(message)
        self.time = time
        self.diagnostics = diagnostics or {}


class IntegratorAccuracyError(MflabError):
    """The orbital integrator lost orthonormality beyond tolerance."""

    def __init__(self, message, *, time=None, drift=None):
        super().__init__(message)
        self.time = time
        self.drift = drift


class ConfigError(MflabError, ValueError):
    """An experiment configuration failed validation."""
