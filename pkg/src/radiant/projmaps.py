"""Projection-derived representations: top-down semantic maps from RGB-D,
center heatmaps with peak detection, image-feature lifting into a world
grid, triplane collapse, and per-point feature sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from .core_math import Aabb, Intrinsics, MIN_DEPTH, Pose, as_vec3, backproject_pixels, project_point, project_points
from .errors import DimsMismatch, LabelOutOfRange, OutOfBounds
from .grids import VoxelGrid4D

# Feature volumes are plain (X, Y, Z, C) grids.
FeatureVolume = VoxelGrid4D


@dataclass
class SemanticMapConfig:
    r: int = 40  # half extent in cells; the map is 2r x 2r
    cell_size: float = 0.1
    height_min: float = 0.1
    height_max: float = 1.8
    classes: int = 1


@dataclass
class SemanticMap:
    """Agent-centered 2r x 2r top-down map of per-class occupancy bits."""

    half_extent: int
    cell_size: float
    occupancy: np.ndarray  # (2r, 2r, K) bool

    def __post_init__(self):
        self.occupancy = np.asarray(self.occupancy, dtype=bool)
        r = self.half_extent
        if self.occupancy.shape[:2] != (2 * r, 2 * r):
            raise DimsMismatch(
                f"occupancy {self.occupancy.shape} does not match half extent {r}"
            )

    @property
    def classes(self) -> int:
        return self.occupancy.shape[2]


def build_semantic_map(
    depth: np.ndarray,
    semantics: np.ndarray,
    k: Intrinsics,
    pose: Pose,
    cfg: SemanticMapConfig,
) -> SemanticMap:
    """Backproject an RGB-D frame and bin obstacle pixels into the map.

    Pixels with zero depth are invalid. A pixel whose world height (z) falls
    inside [height_min, height_max] is an obstacle and sets the bit of its
    semantic class in its cell; everything else contributes free space.
    Cells beyond the map extent are dropped; the agent sits at cell (r, r).
    """
    depth = np.asarray(depth, dtype=np.float64)
    semantics = np.asarray(semantics)
    if depth.shape != semantics.shape:
        raise DimsMismatch(f"depth {depth.shape} vs semantics {semantics.shape}")
    r, k_classes = cfg.r, cfg.classes
    occupancy = np.zeros((2 * r, 2 * r, k_classes), dtype=bool)

    vv, uu = np.nonzero(depth > 0)
    if vv.size == 0:
        return SemanticMap(r, cfg.cell_size, occupancy)
    labels = semantics[vv, uu].astype(np.int64)
    if labels.min() < 0 or labels.max() >= k_classes:
        raise LabelOutOfRange(f"semantic labels outside [0, {k_classes})")
    world = backproject_pixels(
        k, pose, np.stack([uu, vv], axis=-1).astype(np.float64), depth[vv, uu]
    )

    obstacle = (world[:, 2] >= cfg.height_min) & (world[:, 2] <= cfg.height_max)
    rel = world[obstacle, :2] - pose.translation[:2]
    cells = np.floor(rel / cfg.cell_size + r).astype(np.int64)
    labels = labels[obstacle]
    in_map = np.all((cells >= 0) & (cells < 2 * r), axis=1)
    occupancy[cells[in_map, 0], cells[in_map, 1], labels[in_map]] = True
    return SemanticMap(r, cfg.cell_size, occupancy)


def splat_heatmap(centers, sigmas, dims) -> np.ndarray:
    """Max-combined Gaussian splats, one per center, value 1 at each center.

    centers are (u, v) pixel coordinates, dims is (H, W).
    """
    h, w = dims
    sigmas = np.asarray(sigmas, dtype=np.float64).ravel()
    centers = np.atleast_2d(np.asarray(centers, dtype=np.float64))
    if centers.shape[0] != sigmas.size:
        raise ValueError("need one sigma per center")
    if np.any(sigmas <= 0):
        raise ValueError("sigmas must be positive")
    ys, xs = np.mgrid[0:h, 0:w]
    out = np.zeros((h, w))
    for (cu, cv), sig in zip(centers, sigmas):
        d2 = (xs - cu) ** 2 + (ys - cv) ** 2
        np.maximum(out, np.exp(-d2 / (2.0 * sig * sig)), out=out)
    return out


def detect_peaks(heatmap: np.ndarray, threshold: float) -> list[tuple[int, int, float]]:
    """3x3 non-maximum suppression: pixels equal to their neighborhood max
    and strictly above the threshold.

    Within each 3x3 window, plateau ties keep the lexicographically smallest
    (u, v). Results are sorted by descending score (ties again by (u, v)).
    """
    if not (0.0 <= threshold <= 1.0):
        raise ValueError("threshold must lie in [0, 1]")
    h = np.asarray(heatmap, dtype=np.float64)
    local_max = maximum_filter(h, size=3, mode="constant", cval=-np.inf)
    is_peak = (h == local_max) & (h > threshold)

    # kill plateau pixels that see an equal-valued, lexicographically smaller
    # (u, v) inside their window: offsets with du < 0, or du == 0 and dv < 0
    rows, cols = h.shape
    padded = np.pad(h, 1, constant_values=-np.inf)
    for du, dv in ((-1, -1), (-1, 0), (-1, 1), (0, -1)):
        neighbor = padded[1 + dv : 1 + dv + rows, 1 + du : 1 + du + cols]
        is_peak &= neighbor != h

    vs, us = np.nonzero(is_peak)
    peaks = [(int(u), int(v), float(h[v, u])) for u, v in zip(us, vs)]
    peaks.sort(key=lambda t: (-t[2], t[0], t[1]))
    return peaks


def sample_param_map(param_map: np.ndarray, centers) -> list[np.ndarray]:
    """Read the parameter vector at each center (nearest integer pixel)."""
    pm = np.asarray(param_map)
    rows, cols = pm.shape[:2]
    out = []
    for u, v in np.atleast_2d(np.asarray(centers, dtype=np.float64)):
        ui = int(np.floor(u + 0.5))
        vi = int(np.floor(v + 0.5))
        if not (0 <= ui < cols and 0 <= vi < rows):
            raise OutOfBounds(f"center ({u:g}, {v:g}) outside {cols}x{rows}")
        out.append(np.array(pm[vi, ui], dtype=np.float64, copy=True))
    return out


def bilinear_image(fmap: np.ndarray, uv: np.ndarray) -> np.ndarray:
    """Bilinear samples of an (H, W, C) map at continuous pixel coords,
    clamped to the pixel-center lattice."""
    fmap = np.asarray(fmap, dtype=np.float64)
    rows, cols = fmap.shape[:2]
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    x = np.clip(uv[:, 0], 0.0, cols - 1.0)
    y = np.clip(uv[:, 1], 0.0, rows - 1.0)
    x0 = np.minimum(np.floor(x).astype(np.int64), max(cols - 2, 0))
    y0 = np.minimum(np.floor(y).astype(np.int64), max(rows - 2, 0))
    x1 = np.minimum(x0 + 1, cols - 1)
    y1 = np.minimum(y0 + 1, rows - 1)
    fx = (x - x0)[:, None]
    fy = (y - y0)[:, None]
    top = fmap[y0, x0] * (1 - fx) + fmap[y0, x1] * fx
    bot = fmap[y1, x0] * (1 - fx) + fmap[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def lift_features_to_grid(
    feature_map: np.ndarray,
    k: Intrinsics,
    pose: Pose,
    dims,
    bounds: Aabb,
) -> FeatureVolume:
    """Project every grid cell center into the image and store the bilinear
    feature there; cells behind the camera or outside the image get zeros.
    All cells along one camera ray therefore share the ray's feature."""
    fmap = np.asarray(feature_map, dtype=np.float64)
    c = fmap.shape[2]
    vol = VoxelGrid4D.zeros(dims, c, bounds)
    centers = vol.voxel_centers()
    uv, z = project_points(k, pose, centers)
    rows, cols = fmap.shape[:2]
    valid = (
        (z > MIN_DEPTH)
        & (uv[:, 0] >= 0.0)
        & (uv[:, 0] <= cols - 1.0)
        & (uv[:, 1] >= 0.0)
        & (uv[:, 1] <= rows - 1.0)
    )
    flat = vol.data.reshape(-1, c)
    flat[valid] = bilinear_image(fmap, uv[valid])
    vol.data = flat.reshape(*vol.dims, c)
    return vol


@dataclass
class TriplaneSet:
    """Three axis-aligned feature planes over shared world bounds."""

    s_xy: np.ndarray
    s_xz: np.ndarray
    s_yz: np.ndarray
    bounds: Aabb
    dims: tuple[int, int, int]

    def __post_init__(self):
        x, y, z = self.dims
        expected = {(x, y), (x, z), (y, z)}
        got = {self.s_xy.shape[:2], self.s_xz.shape[:2], self.s_yz.shape[:2]}
        if got != expected:
            raise DimsMismatch(f"plane shapes {got} do not match dims {self.dims}")

    @property
    def feature_dim(self) -> int:
        return self.s_xy.shape[2]


def collapse_to_triplanes(v: FeatureVolume) -> TriplaneSet:
    """Mean-collapse the volume along z, y and x into the xy, xz and yz
    planes (uniform weights stand in for learned softmax aggregation)."""
    return TriplaneSet(
        s_xy=v.data.mean(axis=2),
        s_xz=v.data.mean(axis=1),
        s_yz=v.data.mean(axis=0),
        bounds=v.bounds,
        dims=v.dims,
    )


def _bilerp_plane(plane: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    na, nb = plane.shape[:2]
    a = np.clip(a, 0.0, na - 1.0)
    b = np.clip(b, 0.0, nb - 1.0)
    a0 = np.minimum(np.floor(a).astype(np.int64), max(na - 2, 0))
    b0 = np.minimum(np.floor(b).astype(np.int64), max(nb - 2, 0))
    a1 = np.minimum(a0 + 1, na - 1)
    b1 = np.minimum(b0 + 1, nb - 1)
    fa = (a - a0)[..., None]
    fb = (b - b0)[..., None]
    lo = plane[a0, b0] * (1 - fa) + plane[a1, b0] * fa
    hi = plane[a0, b1] * (1 - fa) + plane[a1, b1] * fa
    return lo * (1 - fb) + hi * fb


def sample_triplane(s: TriplaneSet, x) -> np.ndarray:
    """Orthogonally project x into each plane, sample bilinearly, and
    concatenate in xy, xz, yz order. Points outside the bounds clamp."""
    x = as_vec3(x)
    cell = s.bounds.extent / np.array(s.dims, dtype=np.float64)
    cx, cy, cz = (x - s.bounds.min) / cell - 0.5
    f_xy = _bilerp_plane(s.s_xy, np.array([cx]), np.array([cy]))[0]
    f_xz = _bilerp_plane(s.s_xz, np.array([cx]), np.array([cz]))[0]
    f_yz = _bilerp_plane(s.s_yz, np.array([cy]), np.array([cz]))[0]
    return np.concatenate([f_xy, f_xz, f_yz])


def sample_image_feature(feature_map: np.ndarray, k: Intrinsics, pose: Pose, x) -> np.ndarray:
    """Bilinear image feature at the projection of a world point; zeros when
    the point projects outside the image. Raises NonPositiveDepth behind the
    camera."""
    fmap = np.asarray(feature_map, dtype=np.float64)
    (u, v), _ = project_point(k, pose, x)
    rows, cols = fmap.shape[:2]
    if not (0.0 <= u <= cols - 1.0 and 0.0 <= v <= rows - 1.0):
        return np.zeros(fmap.shape[2])
    return bilinear_image(fmap, np.array([[u, v]]))[0]
