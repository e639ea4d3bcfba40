"""Exception hierarchy shared by the reconstruction pipeline."""


class FluoroReconError(Exception):
    """Base class for every error raised by this package."""


class DegenerateProjection(FluoroReconError):
    pass


class DegenerateGeometry(FluoroReconError):
    pass


class DehomogenizationFailure(FluoroReconError):
    pass


class LengthMismatch(FluoroReconError):
    pass


class TriangulationError(FluoroReconError):
    """Wraps a per-point triangulation failure with the offending index."""

    def __init__(self, index, cause):
        super().__init__(f"point {index}: {cause}")
        self.index = index
        self.cause = cause


class SampleError(FluoroReconError):
    """A dataset sample failed; carries the sample index."""

    def __init__(self, index, cause):
        super().__init__(f"sample {index}: {cause}")
        self.index = index
        self.cause = cause


class NoEndpoints(FluoroReconError):
    pass


class MultipleComponents(FluoroReconError):
    pass


class EmptySkeleton(FluoroReconError):
    pass


class PathTooShort(FluoroReconError):
    pass


class DegenerateInput(FluoroReconError):
    pass


class RejectionExhausted(FluoroReconError):
    pass


class OutOfFrustum(FluoroReconError):
    def __init__(self, index, message=None):
        super().__init__(message or f"body {index} projects outside the image")
        self.index = index


class ShapeMismatch(FluoroReconError):
    pass


class EmptyDataset(FluoroReconError):
    pass


class NonFiniteLoss(FluoroReconError):
    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class DatasetFormatError(FluoroReconError):
    pass
