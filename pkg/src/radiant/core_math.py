"""Geometric primitives: vectors, rigid poses, pinhole cameras, rotation
utilities and positional encodings.

Conventions (fixed here because file formats depend on them):
  * camera looks down +z, +x right, +y down; poses are camera-to-world
  * rotation matrices act on column vectors, world point = R @ p_cam + t
  * pixel (u, v) = (column, row), pixel centers at integer coordinates

All functions are pure; everything operates on float64 numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMatrix, NonPositiveDepth

# Depths at or below this are treated as "behind the camera".
MIN_DEPTH = 1e-9


def as_vec3(v) -> np.ndarray:
    """Coerce to a finite float64 3-vector."""
    out = np.asarray(v, dtype=np.float64)
    if out.shape != (3,):
        raise ValueError(f"expected a 3-vector, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError("vector components must be finite")
    return out


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def check_rotation(m, tol: float = 1e-6) -> np.ndarray:
    """Validate a 3x3 matrix as a proper rotation (orthonormal, det +1)."""
    r = np.asarray(m, dtype=np.float64)
    if r.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {r.shape}")
    if np.abs(r.T @ r - np.eye(3)).max() > tol:
        raise ValueError("matrix columns are not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix determinant is not +1")
    return r


def skew(v) -> np.ndarray:
    """Cross-product matrix [v]x such that skew(v) @ w == cross(v, w)."""
    x, y, z = np.asarray(v, dtype=np.float64)
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotation_about(axis, angle: float) -> np.ndarray:
    """Rodrigues formula: rotation by `angle` (radians) about a unit axis."""
    a = normalize(as_vec3(axis))
    k = skew(a)
    return np.eye(3) + math.sin(angle) * k + (1.0 - math.cos(angle)) * (k @ k)


@dataclass
class Aabb:
    """Axis-aligned box, min/max corners in world units."""

    min: np.ndarray
    max: np.ndarray

    def __post_init__(self):
        self.min = as_vec3(self.min)
        self.max = as_vec3(self.max)
        if not np.all(self.min < self.max):
            raise ValueError("Aabb requires min < max on every axis")

    @property
    def extent(self) -> np.ndarray:
        return self.max - self.min

    @property
    def diagonal(self) -> float:
        return float(np.linalg.norm(self.extent))

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=np.float64)
        return np.all((pts >= self.min) & (pts <= self.max), axis=-1)


def cube_bounds(half: float = 1.0) -> Aabb:
    return Aabb(np.full(3, -half), np.full(3, half))


@dataclass
class Intrinsics:
    """Pinhole camera: focal lengths and principal point in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise ValueError("focal lengths must be positive")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be at least 1x1")


@dataclass
class Pose:
    """Rigid camera-to-world transform."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        self.rotation = check_rotation(self.rotation)
        self.translation = as_vec3(self.translation)

    @classmethod
    def identity(cls) -> "Pose":
        return cls(np.eye(3), np.zeros(3))

    def transform(self, pts) -> np.ndarray:
        """Camera-frame points to world frame."""
        pts = np.asarray(pts, dtype=np.float64)
        return pts @ self.rotation.T + self.translation

    def inverse_transform(self, pts) -> np.ndarray:
        """World points to camera frame."""
        pts = np.asarray(pts, dtype=np.float64)
        return (pts - self.translation) @ self.rotation


@dataclass
class Ray:
    """Ray with unit direction."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        self.origin = as_vec3(self.origin)
        self.direction = as_vec3(self.direction)
        if abs(np.linalg.norm(self.direction) - 1.0) > 1e-9:
            raise ValueError("ray direction must be unit length")

    def at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        return self.origin + t[..., None] * self.direction


def project_points(k: Intrinsics, pose: Pose, pts) -> tuple[np.ndarray, np.ndarray]:
    """Batched pinhole projection; no depth check.

    Returns (uv (N,2), depth (N,)). Callers filter on depth themselves;
    see project_point for the checked single-point variant.
    """
    pc = pose.inverse_transform(np.atleast_2d(pts))
    z = pc[:, 2]
    # avoid divide warnings for invalid depths; callers mask them out
    with np.errstate(divide="ignore", invalid="ignore"):
        u = k.fx * pc[:, 0] / z + k.cx
        v = k.fy * pc[:, 1] / z + k.cy
    return np.stack([u, v], axis=-1), z


def project_point(k: Intrinsics, pose: Pose, x) -> tuple[tuple[float, float], float]:
    """Project a world point; raises NonPositiveDepth behind the camera."""
    uv, z = project_points(k, pose, as_vec3(x))
    depth = float(z[0])
    if depth <= MIN_DEPTH:
        raise NonPositiveDepth(f"depth {depth:g} is not positive")
    return (float(uv[0, 0]), float(uv[0, 1])), depth


def backproject_pixels(k: Intrinsics, pose: Pose, uv, depth) -> np.ndarray:
    """Batched inverse pinhole: pixels + depths to world points."""
    uv = np.atleast_2d(np.asarray(uv, dtype=np.float64))
    depth = np.asarray(depth, dtype=np.float64)
    xc = (uv[:, 0] - k.cx) / k.fx * depth
    yc = (uv[:, 1] - k.cy) / k.fy * depth
    return pose.transform(np.stack([xc, yc, depth], axis=-1))


def backproject_pixel(k: Intrinsics, pose: Pose, pixel, depth: float) -> np.ndarray:
    """Invert project_point for one pixel at a known positive depth."""
    if depth <= MIN_DEPTH:
        raise NonPositiveDepth(f"depth {depth:g} is not positive")
    return backproject_pixels(k, pose, [pixel], [depth])[0]


def svd_plus(m) -> np.ndarray:
    """Project a 3x3 matrix to the nearest rotation in SO(3).

    U S' V^T with S' = diag(1, 1, det(U V^T)): the Frobenius-nearest
    proper rotation. Invariant to positive rescaling of the input.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite")
    u, s, vt = np.linalg.svd(m)
    if s[-1] < 1e-12:
        raise DegenerateMatrix(f"smallest singular value {s[-1]:g} < 1e-12")
    d = 1.0 if np.linalg.det(u @ vt) > 0.0 else -1.0
    return u @ np.diag([1.0, 1.0, d]) @ vt


def canonicalize_symmetric(r, axis) -> np.ndarray:
    """Remove the rotation component about a symmetry axis.

    Returns Rot(axis, -theta*) @ r where theta* maximizes the trace of the
    product, i.e. the representative of {Rot(axis, t) @ r} with the smallest
    geodesic angle. Idempotent, and maps Rot(axis, t) @ r to the same output
    for every t.
    """
    r = check_rotation(r)
    a = as_vec3(axis)
    if abs(np.linalg.norm(a) - 1.0) > 1e-6:
        raise ValueError("symmetry axis must be unit length")
    # tr(Rot(a, phi) @ r) = A cos(phi) + B sin(phi) + const
    big_a = np.trace(r) - a @ r @ a
    big_b = np.trace(skew(a) @ r)
    phi = math.atan2(big_b, big_a)
    return rotation_about(a, phi) @ r


def geodesic_angle(r1, r2=None) -> float:
    """Angle (radians) of r1 @ r2^T, or of r1 alone when r2 is None."""
    m = np.asarray(r1, dtype=np.float64)
    if r2 is not None:
        m = m @ np.asarray(r2, dtype=np.float64).T
    c = (np.trace(m) - 1.0) / 2.0
    return math.acos(min(1.0, max(-1.0, c)))


def sinusoidal_pe(x, n_freq: int) -> np.ndarray:
    """Fourier features: per component, [sin(2^k pi x), cos(2^k pi x)] for
    k = 0..n_freq-1, concatenated component-major."""
    if n_freq < 1:
        raise ValueError("n_freq must be at least 1")
    x = np.asarray(x, dtype=np.float64).ravel()
    ang = x[:, None] * (np.pi * 2.0 ** np.arange(n_freq))[None, :]
    return np.stack([np.sin(ang), np.cos(ang)], axis=-1).reshape(-1)


def gaussian_pe_kernel(r: int, w: float, b: float) -> np.ndarray:
    """Gaussian positional-encoding kernel on a 2r x 2r grid.

    Entry (i, j) is b^2 / sqrt(2 pi w^2) * exp(-d^2 / (2 w^2)) with d the
    Euclidean offset of (i, j) from the center cell (r, r).
    """
    if r < 1:
        raise ValueError("half-extent must be at least 1")
    if w <= 0:
        raise ValueError("input scale must be positive")
    off = np.arange(2 * r, dtype=np.float64) - r
    d2 = off[:, None] ** 2 + off[None, :] ** 2
    peak = b * b / math.sqrt(2.0 * math.pi * w * w)
    return peak * np.exp(-d2 / (2.0 * w * w))


def generate_ray_arrays(k: Intrinsics, pose: Pose) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel rays as arrays: origins (N,3), unit directions (N,3).

    Pixel order is row-major: index = v * width + u.
    """
    u, v = np.meshgrid(np.arange(k.width), np.arange(k.height))
    dirs_cam = np.stack(
        [
            (u.ravel() - k.cx) / k.fx,
            (v.ravel() - k.cy) / k.fy,
            np.ones(k.width * k.height),
        ],
        axis=-1,
    )
    dirs = normalize(dirs_cam @ pose.rotation.T)
    origins = np.broadcast_to(pose.translation, dirs.shape).copy()
    return origins, dirs


def generate_rays(k: Intrinsics, pose: Pose) -> list[Ray]:
    """One ray per pixel, row-major; direction through (cx, cy) is the
    camera optical axis in world frame."""
    origins, dirs = generate_ray_arrays(k, pose)
    return [Ray(o, d) for o, d in zip(origins, dirs)]
