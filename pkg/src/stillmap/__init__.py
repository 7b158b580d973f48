"""stillmap: static LiDAR point-cloud maps.

Dynamic-class objects are detected per frame (from detection files or a
clustering fallback), their points are flattened onto the estimated ground
plane so scan sizes never change, and the cleaned scans are accumulated into
a world-frame map via scan-to-map ICP with scan-context loop closure.
Odometry and localization accuracy are measured against ground-truth poses.
"""

from .core import (
    Point3,
    PointCloud,
    PoseSE3,
    Trajectory,
    compose_pose,
    invert_pose,
    transform_cloud,
)
from .detection import ClusterParams, DynamicClassSet, boxes_for_frame, cluster_detect
from .geometry import (
    OrientedBox,
    RangeSpec,
    VoxelGridSpec,
    downsample,
    obb_vertices,
    point_in_obb,
    range_filter,
    voxel_downsample,
    voxel_index,
)
from .ground import GroundModel, GroundParams, ground_mean_z, segment_ground
from .mapping import (
    IcpParams,
    MapBuilder,
    MapState,
    MappingConfig,
    accumulate,
    apply_loop_correction,
    icp_register,
)
from .removal import (
    FrameResult,
    RemovalConfig,
    label_dynamic_points,
    process_frame,
    project_dynamic,
)
from .scancontext import (
    ScanContext,
    ScanContextConfig,
    detect_loop,
    scan_context_descriptor,
    scan_context_distance,
)
from .evaluation import localization_error, odometry_error

__version__ = "0.1.0"
