"""Exception types shared across the package."""


class Vardim3dError(Exception):
    """Base class for all library errors."""


class InvalidInputError(Vardim3dError):
    """An input array violates a documented precondition."""


class ConfigError(Vardim3dError):
    """A configuration object is internally inconsistent."""


class ShapeError(Vardim3dError):
    """A tensor shape does not match what an operation expects."""


class IncompatibleArchitectureError(Vardim3dError):
    """Source and target architectures cannot be matched for conversion."""


class IntegrityError(Vardim3dError):
    """A checkpoint file fails its internal consistency checks."""


class DataError(Vardim3dError):
    """A dataset or sample cannot be used as requested."""
