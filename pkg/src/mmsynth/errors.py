"""Exception types shared across the package."""


class MMSynthError(Exception):
    """Base class for all package errors."""


class SchemaError(MMSynthError):
    """Attribute schema is malformed or an input does not match it."""


class ValidationError(MMSynthError):
    """A value is outside its documented domain."""


class MalformedLabelError(MMSynthError):
    """A target label cannot be decomposed (e.g. its modality tail is not one-hot)."""


class ShapeError(MMSynthError):
    """Tensor shapes are incompatible with the requested operation."""


class GrowthError(MMSynthError):
    """A network was asked to grow past its configured maximum resolution."""


class ConfigError(MMSynthError):
    """Bad or inconsistent configuration."""


class DataError(MMSynthError):
    """Dataset or manifest problem."""


class NumericError(MMSynthError):
    """A non-finite value was produced where finite numbers are required."""


class CheckpointError(MMSynthError):
    """Checkpoint file is corrupt or has an unsupported format version."""
