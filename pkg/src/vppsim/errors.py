"""Exception types shared across the simulator."""


class VppError(Exception):
    """Base class for simulator errors."""


class SchemaError(VppError, ValueError):
    """Input file does not match the expected column schema."""


class LengthError(VppError, ValueError):
    """Time series has the wrong number of rows after preprocessing."""


class OrderingError(VppError, ValueError):
    """Timestamps are not strictly increasing."""


class ConfigError(VppError, ValueError):
    """Invalid configuration value."""


class LifecycleError(VppError, RuntimeError):
    """Operation called in the wrong episode phase (e.g. step after done)."""


class ProtocolError(VppError, ValueError):
    """Malformed message on the external-agent protocol."""
