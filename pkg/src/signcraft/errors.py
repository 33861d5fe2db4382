"""Exception types shared across the package."""


class SigncraftError(Exception):
    """Base class for all package-specific errors."""


class ShapeError(SigncraftError, ValueError):
    """Tensor shapes are invalid or incompatible for an operation."""


class FormatError(SigncraftError, ValueError):
    """A file does not match its expected on-disk format (bad magic, version...)."""


class UnsupportedFormatError(FormatError):
    """The file format is recognized but a variant we do not handle."""


class CorruptFileError(SigncraftError, ValueError):
    """An image file is structurally valid up front but its payload is damaged."""


class CorruptCheckpointError(SigncraftError, ValueError):
    """A checkpoint's payload disagrees with its descriptor (CRC, shapes, length)."""


class InvalidArchitectureError(SigncraftError, ValueError):
    """A model architecture does not satisfy a structural requirement."""


class EmptyDatasetError(SigncraftError, ValueError):
    """An operation that needs at least one sample was given none."""
