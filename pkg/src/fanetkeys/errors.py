"""Exception classes shared across the package."""


class FanetKeysError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(FanetKeysError):
    """A scenario or parameter file violates an invariant or is malformed."""


class SimulationError(FanetKeysError):
    """A run failed after configuration was validated."""


class NoCoverageError(FanetKeysError):
    """The receiver threshold is unreachable at any distance."""


class RecordRejectedError(FanetKeysError):
    """A key record was expired or failed signature verification on insert."""
