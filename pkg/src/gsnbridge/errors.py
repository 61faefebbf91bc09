"""Exception hierarchy shared by the codec, runtime and server."""


class GsnBridgeError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(GsnBridgeError, ValueError):
    """A value does not satisfy a type invariant (arity, flags, ranges)."""


class MalformedPacketError(ValidationError):
    """Bytes on the wire violate the fixed packet layout."""


class FramingError(GsnBridgeError):
    """Fewer or more bytes than the negotiated frame size."""


class LoadError(GsnBridgeError):
    """A virtual sensor definition could not be parsed or loaded."""


class WrapperStateError(GsnBridgeError):
    """Illegal wrapper lifecycle transition."""


class NotReadyError(GsnBridgeError):
    """The wrapper's output format is not known yet."""


class ConfigError(GsnBridgeError, ValueError):
    """Invalid client or energy-model configuration."""
