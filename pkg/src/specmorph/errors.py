"""Exception types shared across the detector library."""


class DetectorError(Exception):
    """Base class for all library errors."""


class InvalidInputError(DetectorError, ValueError):
    """Input violates a documented precondition (non-finite, bad range, bad shape)."""


class DimensionMismatchError(DetectorError, ValueError):
    """Operands have incompatible dimensions."""


class DegenerateFitError(DetectorError, ValueError):
    """Too few usable points to fit a model."""


class DegenerateRegionError(DetectorError, ValueError):
    """A facial region collapsed to zero area."""


class SingleClassError(DetectorError, ValueError):
    """A labelled set contains only one class where two are required."""


class CapacityError(DetectorError, ValueError):
    """Request exceeds a configured capacity guard."""


class ConvergenceError(DetectorError, RuntimeError):
    """An iterative solver hit its iteration cap before reaching tolerance."""


class BundleFormatError(DetectorError, ValueError):
    """A persisted detector bundle is malformed or has an unknown version."""


class ManifestError(DetectorError, ValueError):
    """A dataset manifest is malformed or references missing files."""
