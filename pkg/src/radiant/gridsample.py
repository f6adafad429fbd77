"""Extraction of explicit RGBA voxel grids from radiance fields.

Each voxel center is queried once per direction; the density is converted
to opacity with the preset spacing (alpha = 1 - exp(-sigma * 0.01)) and all
four channels are averaged over the direction set. Scene bounds come from
the enlarged AABB of cameras and object boxes.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core_math import Aabb, Pose, normalize
from .errors import EmptyScene
from .fields import RadianceField
from .grids import ALPHA_DELTA, VoxelGrid4D, trilinear
from .metrics import OrientedBox3

# Default direction set when no cameras drive the averaging: the six axes.
AXIS_DIRECTIONS = np.array(
    [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ]
)


def compute_scene_bounds(
    cameras: Sequence[Pose],
    boxes: Sequence[OrientedBox3] = (),
    margin: float = 0.1,
) -> Aabb:
    """AABB of all camera centers and box corners, each side pushed out by
    margin * (max - min) per axis. Degenerate (zero-volume) results are
    rejected."""
    pts = [p.translation for p in cameras]
    for box in boxes:
        pts.extend(box.corners())
    if not pts:
        raise EmptyScene("need at least one camera or box")
    pts = np.asarray(pts)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    pad = margin * (hi - lo)
    lo, hi = lo - pad, hi + pad
    if not np.all(lo < hi):
        raise EmptyScene("scene bounds have zero volume")
    return Aabb(lo, hi)


def sample_grid(
    field: RadianceField,
    bounds: Aabb,
    dims,
    directions,
    delta: float = ALPHA_DELTA,
) -> VoxelGrid4D:
    """Average (r, g, b, alpha) over the direction set at every voxel center.

    Voxels are processed in chunks so default-size grids (160^3 x several
    directions) stay within a few hundred MB; chunking does not change the
    output (each voxel is independent).
    """
    directions = normalize(np.atleast_2d(np.asarray(directions, dtype=np.float64)))
    if directions.shape[0] < 1:
        raise ValueError("need at least one direction")
    if delta <= 0:
        raise ValueError("delta must be positive")
    grid = VoxelGrid4D.zeros(dims, 4, bounds)
    centers = grid.voxel_centers()
    acc = np.zeros((centers.shape[0], 4))
    chunk = 1 << 20
    for lo in range(0, centers.shape[0], chunk):
        pts = centers[lo : lo + chunk]
        for d in directions:
            colors, sigmas = field.eval(pts, np.tile(d, (pts.shape[0], 1)))
            acc[lo : lo + chunk, :3] += colors
            acc[lo : lo + chunk, 3] += -np.expm1(
                -np.asarray(sigmas, dtype=np.float64) * delta
            )
    acc /= directions.shape[0]
    grid.data = acc.reshape(*grid.dims, 4)
    return grid


def resample_grid(g: VoxelGrid4D, new_dims) -> VoxelGrid4D:
    """Trilinear resampling with the align-corners convention: the first and
    last voxel centers of every axis coincide with the source grid's."""
    new_dims = tuple(int(n) for n in new_dims)
    if any(n < 2 for n in new_dims):
        raise ValueError("each target dimension must be at least 2")
    old = g.dims
    axes = [
        np.linspace(0.0, old[i] - 1.0, new_dims[i]) if old[i] > 1 else np.zeros(new_dims[i])
        for i in range(3)
    ]
    cx, cy, cz = np.meshgrid(*axes, indexing="ij")
    coords = np.stack([cx, cy, cz], axis=-1).reshape(-1, 3)
    data = trilinear(g.data, coords).reshape(*new_dims, g.channels)
    return VoxelGrid4D(data, g.bounds)
