"""Exception types raised across the package."""


class VolumetryError(Exception):
    """Base class for all package errors."""


class ManifestError(VolumetryError, ValueError):
    """Malformed or inconsistent manifest file."""


class ValidationError(VolumetryError, ValueError):
    """An input violates a data-model invariant."""


class MissingSpacingError(ValidationError):
    pass


class PGMFormatError(VolumetryError, ValueError):
    pass


class DegenerateMaskError(VolumetryError, ValueError):
    pass


class FitError(VolumetryError, ValueError):
    """The ellipse fit has no valid solution for the given points."""


class EmptySweepError(VolumetryError, ValueError):
    pass


class PlaneMismatchError(VolumetryError, ValueError):
    pass


class UndefinedDistanceError(VolumetryError, ValueError):
    """Hausdorff distance requested for an empty mask."""


class AlignmentError(VolumetryError, ValueError):
    """Paired sweeps or masks do not line up frame-for-frame."""


class DomainError(VolumetryError, ValueError):
    pass


class InsufficientDataError(VolumetryError, ValueError):
    pass


class GeometryError(VolumetryError, ValueError):
    """A phantom does not fit inside the requested frame."""
