"""Exception types shared across the toolkit."""


class ScrFocusError(Exception):
    """Base class for all toolkit errors."""


class ParseError(ScrFocusError):
    """Malformed map file; carries the offending line number."""

    def __init__(self, line_no, message):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class DanglingReference(ScrFocusError):
    """A point track cites an image id that does not exist."""


class InvalidPose(ScrFocusError):
    """Quaternion norm too far from 1 to trust the record."""


class UnknownImage(ScrFocusError):
    """Queried image id is not part of the map."""


class InfeasibleScene(ScrFocusError):
    """Synthetic scene would leave some image with too few visible points."""


class OutOfFrame(ScrFocusError):
    """Descriptor queried outside the image frame."""


class NoSeeds(ScrFocusError):
    """All re-projected map points fell outside the (augmented) frame."""


class AllImagesSkipped(ScrFocusError):
    """Buffer construction found no image with usable seed keypoints."""


class DimMismatch(ScrFocusError):
    """Descriptor dimensionality does not match the regression head."""


class NonFiniteLoss(ScrFocusError):
    """Training hit a non-finite loss value."""


class DegenerateSample(ScrFocusError):
    """Minimal solver sample is collinear or contains duplicates."""


class NotEnoughCorrespondences(ScrFocusError):
    """Pose estimation needs at least 4 correspondences."""


class LocalizationFailed(ScrFocusError):
    """No hypothesis reached the minimum inlier count."""


class NoSuccessfulFrames(ScrFocusError):
    """Median pose error is undefined without at least one success."""
