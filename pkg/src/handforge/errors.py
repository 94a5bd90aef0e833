"""Exception hierarchy shared across the package.

Every error raised on a user-facing path derives from HandforgeError so the
CLI can map error classes to distinct exit codes.
"""


class HandforgeError(Exception):
    """Base class for all package errors."""


class ValidationError(HandforgeError):
    """Invalid input data (bad shapes, unnormalized weights, bad ranges)."""


class BehindCameraError(HandforgeError):
    """A point has non-positive depth in the camera frame."""

    def __init__(self, indices):
        self.indices = list(indices)
        super().__init__(f"points behind camera at indices {self.indices}")


class InsufficientViewsError(HandforgeError):
    """Fewer than two views available for triangulation."""


class JointVisibilityError(HandforgeError):
    """One or more joints observed in fewer than two views."""

    def __init__(self, joints):
        self.joints = list(joints)
        super().__init__(
            f"joints {self.joints} are observed in fewer than 2 views"
        )


class TopologyError(HandforgeError):
    """Mesh connectivity violates a required property."""


class CaptureError(HandforgeError):
    """A capture directory is missing files or inconsistent."""


class DegenerateTargetError(HandforgeError):
    """An optimization target carries no usable signal (e.g. empty masks)."""


class StageError(HandforgeError):
    """A pipeline stage failed or its prerequisites are missing."""

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"stage '{stage}': {message}")
