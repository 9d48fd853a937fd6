"""Exception hierarchy. Every error the CLI reports as JSON derives from CellSynthError."""


class CellSynthError(Exception):
    """Base class for all cellsynth errors."""


class DegenerateBlobError(CellSynthError):
    """Blob has no usable closed boundary (e.g. a one-pixel-wide line)."""


class RasterizationRejectedError(CellSynthError):
    """A rasterized contour produced no component of acceptable size."""


class BlobGenerationError(CellSynthError):
    """Retry budget exhausted before the requested number of blobs existed."""

    def __init__(self, message, produced):
        super().__init__(message)
        self.produced = produced


class EmptyMaskError(CellSynthError):
    """A mask required to contain foreground has none."""


class InsufficientInputError(CellSynthError):
    """Inputs too small for the requested operation (e.g. fewer than 2 blobs)."""


class DimensionMismatchError(CellSynthError):
    """Paired image and mask (or mask and prior) dimensions disagree."""


class FileFormatError(CellSynthError):
    """A file exists but cannot be decoded into the expected representation."""
