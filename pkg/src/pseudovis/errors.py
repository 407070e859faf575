"""Exception types shared across the package."""


class PseudoVisError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(PseudoVisError):
    """A manifest or config record violates the expected schema."""


class CodecError(PseudoVisError):
    """A mask encoding cannot be decoded (bad counts, degenerate polygon)."""


class GeometryError(PseudoVisError):
    """An affine transform or raster shape is unusable."""


class ConfigError(PseudoVisError):
    """Mutually inconsistent or out-of-range configuration values."""


class ShapeError(PseudoVisError):
    """A tensor does not have the dimensions an operation requires."""


class WeightFormatError(PseudoVisError):
    """A weight sidecar file is truncated or inconsistent with its header."""
