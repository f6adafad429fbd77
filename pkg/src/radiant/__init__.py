"""radiant: geometry and evaluation toolkit for neural-field scenes.

Library modules:
  core_math   poses, cameras, rotations, positional encodings
  fields      SDF and radiance field abstractions with analytic oracles
  octree      octree LoD surface extraction + dense narrowband baseline
  render      alpha compositing, near/far unbounded rendering, scene editing
  gridsample  radiance-field to RGBA voxel grid extraction and resampling
  masking     3D patch masking and masked-reconstruction objectives
  projmaps    semantic maps, center heatmaps, feature lifting, triplanes
  metrics     Chamfer / IoU / AP / pose / voxel / navigation metrics
  io          NFVG, PLY, PPM and JSON formats
  cli         `radiant` command-line front end
"""

from .core_math import (
    Aabb,
    Intrinsics,
    Pose,
    Ray,
    backproject_pixel,
    canonicalize_symmetric,
    gaussian_pe_kernel,
    generate_rays,
    project_point,
    sinusoidal_pe,
    svd_plus,
)
from .errors import RadiantError
from .fields import (
    GridField,
    RadianceField,
    SdfField,
    grid_field_eval,
    make_analytic_sdf,
    make_constant_field,
    sdf_normal,
)
from .grids import VoxelGrid4D
from .gridsample import compute_scene_bounds, resample_grid, sample_grid
from .masking import (
    PatchMask,
    apply_mask,
    patchify,
    psnr3d,
    random_mask,
    recon_losses,
)
from .metrics import (
    OrientedBox3,
    PoseRecord,
    Trajectory,
    chamfer,
    detection_ap,
    iou3d,
    nav_metrics,
    pose_ap,
    pose_errors,
    voxel_label_metrics,
)
from .octree import (
    ExtractionStats,
    LodConfig,
    SurfaceSample,
    dense_extract,
    extract_surface,
    project_to_surface,
)
from .projmaps import (
    SemanticMap,
    SemanticMapConfig,
    TriplaneSet,
    build_semantic_map,
    collapse_to_triplanes,
    detect_peaks,
    lift_features_to_grid,
    sample_image_feature,
    sample_param_map,
    sample_triplane,
    splat_heatmap,
)
from .render import (
    CompositeResult,
    RaySamples,
    RenderConfig,
    alpha_from_sigma,
    composite,
    contract_nerfpp,
    distortion_reg,
    prune_rays_in_boxes,
    render_composed,
    render_ray_nearfar,
    stratified_samples,
)

__version__ = "0.1.0"
