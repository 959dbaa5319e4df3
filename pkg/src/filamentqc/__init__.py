"""Sensor-independent filament quality control for 3D concrete printing.

The pipeline renders a point cloud through a virtual pinhole camera, cuts the
image into sliding-window tiles, segments filament instances per tile, merges
them back into the global frame, measures per-column thickness with an exact
Euclidean distance transform, and projects the instance labels back onto the
3D points.
"""

from .accel import NUMBA_ENABLED
from .backproject import LabeledCloud, export_labeled, label_points
from .baseline import segment_baseline
from .camera import (
    EulerAngles,
    Frustum,
    Intrinsics,
    Pose,
    build_frustum,
    clip,
    euler_to_rotation,
    frame_intrinsics,
    gsd,
    place_ksp,
    place_pp,
    project,
    project_points,
    shannon_gsd,
    working_distance,
)
from .cloud import (
    AABB,
    ColorAttr,
    Plane,
    PointCloud,
    compute_aabb,
    compute_centroid,
    fit_plane,
    signed_distance_colorize,
    voxel_subsample,
)
from .heightprofile import (
    DistanceMap,
    PlanComparison,
    ThicknessProfile,
    column_profile,
    compare_to_plan,
    distance_transform,
)
from .io_ply import load_point_cloud, save_point_cloud
from .masks import (
    InstanceMask,
    SegmentationResult,
    export_masks,
    filter_masks,
    import_masks,
    rle_decode,
    rle_encode,
)
# the render operation itself lives in filamentqc.render (module name and
# function name coincide; import it from the submodule)
from .render import RenderBuffer, SplatConfig
from .synth import HelicalPath, StraightPath, SynthSpec, generate
from .tiles import GlobalInstance, TileGrid, merge_instances, reattach, tile

__version__ = "0.1.0"
