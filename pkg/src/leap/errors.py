"""Exception hierarchy shared by every module in the package."""


class LeapError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(LeapError, ValueError):
    """A frame dimension is outside the 12-bit range [1, 4095]."""


class FormatError(LeapError, ValueError):
    """Malformed or unsupported image / sequence data."""


class ConfigurationError(LeapError, ValueError):
    """Incompatible configuration (dimensions, ring capacities, modes)."""


class ConsistencyError(LeapError, ValueError):
    """Inputs that must agree with each other do not."""


class RangeError(LeapError, ValueError):
    """A scalar argument is outside its permitted range."""


class ProtocolError(LeapError):
    """The reset-gated register protocol was violated."""


class ResetViolationError(ProtocolError):
    """A stream token was pushed while the stage is held in reset."""


class FramingError(LeapError):
    """Start-of-frame / end-of-line flags disagree with the configured geometry."""
