"""Exception hierarchy shared by every mixforge module."""


class MixforgeError(Exception):
    """Base class for all errors raised by mixforge."""


class WavError(MixforgeError):
    pass


class WavNotFoundError(WavError, FileNotFoundError):
    pass


class MalformedWavError(WavError):
    pass


class UnsupportedEncodingError(WavError):
    pass


class EmptyClipError(MixforgeError, ValueError):
    pass


class RateMismatchError(MixforgeError, ValueError):
    pass


class ShapeMismatchError(MixforgeError, ValueError):
    pass


class DegenerateInputError(MixforgeError, ValueError):
    """Input carries no usable signal (all-zero reference, silent mixture, N < K...)."""


class InfeasiblePlanError(MixforgeError):
    """The planner cannot satisfy the requested constraints.

    ``constraint`` names the binding constraint so callers can report it.
    """

    def __init__(self, message, constraint):
        super().__init__(message)
        self.constraint = constraint


class CorpusError(MixforgeError):
    pass


class ManifestError(MixforgeError):
    pass


class ConfigError(MixforgeError, ValueError):
    pass
