"""Exception hierarchy shared across the package.

Every error the CLI maps to a distinct exit code lives here so that the
mapping stays in one place.
"""


class AdvmaskError(Exception):
    """Base class for all package-specific errors."""


class PNMFormatError(AdvmaskError):
    """Malformed PGM/PPM file. Carries the byte offset of the defect."""

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class WeightFormatError(AdvmaskError):
    """Malformed weight file (bad magic, architecture or blob mismatch)."""


class MapFormatError(AdvmaskError):
    """Malformed strength/entropy map file."""


class KappaUnreachableError(AdvmaskError):
    """Requested relative total strength cannot be reached.

    ``achievable`` holds the (lo, hi) range that can be reached.
    """

    def __init__(self, target, achievable):
        lo, hi = achievable
        super().__init__(
            f"target kappa {target:.6g} unreachable; achievable range is "
            f"[{lo:.6g}, {hi:.6g}]"
        )
        self.target = target
        self.achievable = achievable


class ZeroMaskError(AdvmaskError):
    """Strength map is identically zero, so no pixel can be attacked."""


class DegenerateSampleError(AdvmaskError):
    """Sample has zero variance (or is otherwise unusable for a test)."""


class StudyError(AdvmaskError):
    """Base class for study-service protocol errors."""


class UnknownSessionError(StudyError):
    pass


class TrialIndexError(StudyError):
    pass


class DuplicateResponseError(StudyError):
    pass
