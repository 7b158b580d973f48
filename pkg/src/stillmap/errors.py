"""Error types raised by the pipeline stages."""


class MalformedFileError(ValueError):
    """A scan, pose, detection, or PLY file violates its format contract."""


class OutOfRangeError(ValueError):
    """A point lies outside the voxel grid it was indexed against."""


class DegenerateGroundError(RuntimeError):
    """Ground fitting produced a non-vertical plane or too few inliers."""


class EmptyGroundError(ValueError):
    """A ground statistic was requested over an empty index set."""


class NoCorrespondencesError(RuntimeError):
    """ICP found zero point matches at the initial pose."""


class RegistrationFailedError(RuntimeError):
    """Scan-to-map registration fell below the fitness gate."""


class DimensionMismatchError(ValueError):
    """Two descriptors have incompatible grid dimensions."""


class NoOverlapError(ValueError):
    """Two trajectories share no frame ids."""
