"""Error types raised by the planning pipeline.

Every error carries the exit code the command line surface reports for it:
2 for input and contract violations, 3 when no path exists.
"""


class PathPlanningError(Exception):
    """Base class for all pipeline errors."""

    exit_code = 2


# Raster I/O and image primitives
class MalformedHeader(PathPlanningError):
    pass


class UnsupportedMaxval(PathPlanningError):
    pass


class TruncatedData(PathPlanningError):
    pass


class IoFailure(PathPlanningError):
    pass


class KernelTooLarge(PathPlanningError):
    pass


# Edges and features
class NonPositiveSigma(PathPlanningError):
    pass


class ImageTooSmall(PathPlanningError):
    pass


class BadThresholds(PathPlanningError):
    pass


class StartGoalDisparityMismatch(PathPlanningError):
    pass


class BadRadii(PathPlanningError):
    pass


# Detection
class NotFound(PathPlanningError):
    pass


class Ambiguous(PathPlanningError):
    pass


class GoalNotFound(PathPlanningError):
    pass


# Stereo
class DimensionMismatch(PathPlanningError):
    pass


class BadWindow(PathPlanningError):
    pass


class ZeroDisparity(PathPlanningError):
    pass


class StereoFailure(PathPlanningError):
    pass


# Geometry
class ParallelLines(PathPlanningError):
    pass


class DegenerateSegment(PathPlanningError):
    pass


# Scenes and planners
class OverlapError(PathPlanningError):
    pass


class StartInObstacle(PathPlanningError):
    pass


class GoalInObstacle(PathPlanningError):
    pass


class InvalidConfig(PathPlanningError):
    pass


class NoPath(PathPlanningError):
    """Start and goal are not connected."""

    exit_code = 3
