"""Dense voxel grids and trilinear interpolation helpers.

The 4D grid (X, Y, Z, channels) is the working representation for extracted
radiance/density volumes: channels are (r, g, b, alpha) with alpha stored,
not raw density. Data is float64 in memory; the NFVG file format stores f32.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core_math import Aabb
from .errors import DimsMismatch

# Preset sample spacing used to convert density to opacity (and back) when a
# grid stores alpha: alpha = 1 - exp(-sigma * ALPHA_DELTA).
ALPHA_DELTA = 0.01


@dataclass
class VoxelGrid4D:
    """Dense (X, Y, Z, C) grid with voxel centers mapped into `bounds`."""

    data: np.ndarray
    bounds: Aabb

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 4:
            raise ValueError(f"grid data must be 4D, got shape {self.data.shape}")

    @property
    def dims(self) -> tuple[int, int, int]:
        return self.data.shape[:3]

    @property
    def channels(self) -> int:
        return self.data.shape[3]

    @property
    def cell_size(self) -> np.ndarray:
        return self.bounds.extent / np.array(self.dims, dtype=np.float64)

    @classmethod
    def zeros(cls, dims, channels: int, bounds: Aabb) -> "VoxelGrid4D":
        x, y, z = dims
        return cls(np.zeros((x, y, z, channels)), bounds)

    def voxel_centers(self) -> np.ndarray:
        """World positions of all voxel centers, shape (X*Y*Z, 3), x-major."""
        axes = [
            self.bounds.min[i] + (np.arange(self.dims[i]) + 0.5) * self.cell_size[i]
            for i in range(3)
        ]
        gx, gy, gz = np.meshgrid(*axes, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    def world_to_grid(self, pts) -> np.ndarray:
        """Continuous voxel-center coordinates: centers land on integers."""
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - self.bounds.min) / self.cell_size - 0.5

    def check_same_dims(self, other: "VoxelGrid4D"):
        if self.data.shape != other.data.shape:
            raise DimsMismatch(f"{self.data.shape} vs {other.data.shape}")


def trilinear(data: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Trilinear interpolation of (X, Y, Z, C) data at continuous coords.

    Coordinates are in voxel-index space (integers hit stored values) and are
    clamped to the valid range, so queries between a boundary and the nearest
    center reuse the edge value. Coordinates within 1e-9 of an integer snap
    to it, which keeps voxel-center queries exact despite the world-to-grid
    division.
    """
    dims = np.array(data.shape[:3])
    c = np.clip(coords, 0.0, dims - 1.0)
    snapped = np.rint(c)
    c = np.where(np.abs(c - snapped) < 1e-9, snapped, c)
    i0 = np.floor(c).astype(np.int64)
    i0 = np.minimum(i0, dims - 2)  # keep i0+1 in range; exact upper edge ok
    i0 = np.maximum(i0, 0)
    f = c - i0

    if (dims == 1).any():
        # degenerate axes: only index 0 exists, force zero fraction there
        f = np.where(dims - 1 == 0, 0.0, f)
        i0 = np.minimum(i0, np.maximum(dims - 2, 0))

    x0, y0, z0 = i0[..., 0], i0[..., 1], i0[..., 2]
    x1 = np.minimum(x0 + 1, dims[0] - 1)
    y1 = np.minimum(y0 + 1, dims[1] - 1)
    z1 = np.minimum(z0 + 1, dims[2] - 1)
    fx, fy, fz = (f[..., i, None] for i in range(3))

    c00 = data[x0, y0, z0] * (1 - fx) + data[x1, y0, z0] * fx
    c01 = data[x0, y0, z1] * (1 - fx) + data[x1, y0, z1] * fx
    c10 = data[x0, y1, z0] * (1 - fx) + data[x1, y1, z0] * fx
    c11 = data[x0, y1, z1] * (1 - fx) + data[x1, y1, z1] * fx
    c0 = c00 * (1 - fy) + c10 * fy
    c1 = c01 * (1 - fy) + c11 * fy
    return c0 * (1 - fz) + c1 * fz


def alpha_to_sigma(alpha, delta: float = ALPHA_DELTA):
    """Invert the extraction formula: sigma = -ln(1 - alpha) / delta."""
    with np.errstate(divide="ignore"):
        return -np.log1p(-np.asarray(alpha, dtype=np.float64)) / delta
