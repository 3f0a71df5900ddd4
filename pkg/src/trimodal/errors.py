"""Exception types shared across the package."""


class TrimodalError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(TrimodalError):
    """Operand shapes are incompatible with the requested operation."""


class NumericError(TrimodalError):
    """An operation produced (or was handed) a NaN or infinite value."""


class GraphError(TrimodalError):
    """Invalid use of the autodiff graph (non-scalar root, double backward, ...)."""


class DegenerateVectorError(TrimodalError):
    """A row scheduled for L2 normalization has (near-)zero norm."""


class FormatError(TrimodalError):
    """A binary file (LTF tensor / LAVC archive) is malformed or truncated."""


class ConfigError(TrimodalError):
    """A configuration document or CLI flag combination is invalid."""


class AvailabilityError(TrimodalError):
    """A modality required by the requested operation is absent."""


class MaskError(TrimodalError):
    """A loss term was asked to operate on an empty availability mask."""


class TrainingAborted(TrimodalError):
    """Training stopped because of a numeric failure; the last good checkpoint is kept."""
