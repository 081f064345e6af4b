"""Exception hierarchy shared by the whole toolkit.

The CLI maps these onto exit codes: usage errors (InvalidParams and
argument parsing) exit 1, data errors (files, parsing) exit 2 and
degenerate-input errors exit 3.
"""


class CloudpostError(Exception):
    """Base class for all toolkit errors."""


class InvalidParams(CloudpostError):
    """A parameter violates its documented range."""


class InvalidRadius(InvalidParams):
    """Search radius must be strictly positive."""


class InvalidResolution(InvalidParams):
    """Octree leaf resolution must be strictly positive."""


class InvalidSpec(InvalidParams):
    """A scene / pipeline / sweep specification is malformed."""


class DegenerateInputError(CloudpostError):
    """Input is structurally valid but degenerate for the operation."""


class EmptyCloud(DegenerateInputError):
    """Operation requires a non-empty point cloud."""


class TooFewPoints(DegenerateInputError):
    """Cloud has too few points for the requested statistic."""


class DegenerateNeighborhood(DegenerateInputError):
    """Local neighborhood cannot support a surface fit."""


class NoCorrespondences(DegenerateInputError):
    """No point pairs within the matching distance (scale/frame mismatch?)."""


class TooFewPoses(DegenerateInputError):
    """Scale estimation needs at least two poses with shared time indices."""


class DegenerateTrajectory(DegenerateInputError):
    """All axes have (numerically) zero translation spread."""


class EmptyTrajectory(DegenerateInputError):
    """Trajectory file contains no poses."""


class DataError(CloudpostError):
    """File-level I/O and parsing failures."""


class ParseError(DataError):
    """Malformed content at a specific line of an input file."""

    def __init__(self, path, line, reason):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class UnsupportedFormat(DataError):
    """File extension / header not recognized."""


class NonMonotoneTimestamps(DataError):
    """Trajectory timestamps must be strictly increasing."""
