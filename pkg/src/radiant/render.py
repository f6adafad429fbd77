"""Volume rendering: stratified ray sampling, alpha compositing, the
inverted-sphere near/far decomposition for unbounded scenes, distortion
regularization, and box pruning for compositional scene editing.

Rays for the near/far renderer must start inside the unit sphere. The near
region covers [near, t_sphere] along the ray; the far region is sampled
uniformly in inverse radius 1/r over (0, 1], which allocates resolution
inversely with distance. Object, near and far sample streams are merged by
t (ties: object, then near, then far) and composited in a single pass, so
editing with no boxes reproduces plain near/far rendering bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .core_math import Ray
from .errors import (
    LengthMismatch,
    InsideUnitSphere,
    NegativeDensity,
    OriginOutsideSphere,
)
from .fields import RadianceField
from .metrics import OrientedBox3

# Density written into pruned samples; compositing clamps sigma at zero, so
# this deletes the sample exactly while keeping the stored value faithful.
SUPPRESSION_SIGMA = -1e-5

_OBJECT, _NEAR, _FAR = 0, 1, 2


@dataclass
class RenderConfig:
    near: float = 0.02
    far: float = 3.0
    n_coarse: int = 64
    n_fine: int = 0  # hierarchical resampling, off by default
    seed: int = 0

    def __post_init__(self):
        if not (0 < self.near < self.far):
            raise ValueError("need 0 < near < far")
        if self.n_coarse < 1:
            raise ValueError("n_coarse must be at least 1")
        if self.n_fine < 0:
            raise ValueError("n_fine must be nonnegative")


@dataclass
class RaySamples:
    """Sorted sample depths and the segment length owned by each sample
    (the last segment runs to the far bound)."""

    t_values: np.ndarray
    deltas: np.ndarray

    def __post_init__(self):
        self.t_values = np.asarray(self.t_values, dtype=np.float64)
        self.deltas = np.asarray(self.deltas, dtype=np.float64)
        if self.t_values.shape != self.deltas.shape:
            raise LengthMismatch("t_values and deltas must have equal length")
        if self.t_values.size and np.any(np.diff(self.t_values) <= 0):
            raise ValueError("t_values must be strictly increasing")
        if np.any(self.deltas <= 0):
            raise ValueError("deltas must be positive")


class CompositeResult(NamedTuple):
    color: np.ndarray
    acc: float
    weights: np.ndarray


def _stratified(rng: np.random.Generator, lo: float, hi: float, n: int) -> np.ndarray:
    """One uniform draw per equal-width stratum of [lo, hi)."""
    return lo + (np.arange(n) + rng.random(n)) * (hi - lo) / n


def stratified_samples(ray: Ray, cfg: RenderConfig) -> RaySamples:
    """Stratified coarse samples of [near, far]; deterministic in the seed."""
    rng = np.random.default_rng(cfg.seed)
    t = _stratified(rng, cfg.near, cfg.far, cfg.n_coarse)
    deltas = np.append(np.diff(t), cfg.far - t[-1])
    return RaySamples(t, deltas)


def alpha_from_sigma(sigma, delta):
    """Opacity of one segment: alpha = 1 - exp(-sigma * delta)."""
    sigma = np.asarray(sigma, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if np.any(sigma < 0):
        raise NegativeDensity("sigma must be nonnegative")
    if np.any(delta <= 0):
        raise ValueError("delta must be positive")
    out = -np.expm1(-sigma * delta)
    return float(out) if out.ndim == 0 else out


def composite(colors, sigmas, deltas) -> CompositeResult:
    """Front-to-back alpha compositing.

    w_i = alpha_i * prod_{j<i} (1 - alpha_j); returns the weighted color,
    the accumulated opacity (= sum of weights), and the weights themselves.
    Negative densities (pruned samples) are clamped to zero here.
    """
    colors = np.atleast_2d(np.asarray(colors, dtype=np.float64))
    sigmas = np.asarray(sigmas, dtype=np.float64).ravel()
    deltas = np.asarray(deltas, dtype=np.float64).ravel()
    if sigmas.size == 0 and colors.size == 0:
        colors = np.zeros((0, 3))
    if not (colors.shape[0] == sigmas.size == deltas.size):
        raise LengthMismatch(
            f"colors/sigmas/deltas lengths {colors.shape[0]}/{sigmas.size}/{deltas.size}"
        )
    alpha = -np.expm1(-np.maximum(sigmas, 0.0) * deltas)
    trans = np.concatenate([[1.0], np.cumprod(1.0 - alpha)[:-1]])
    weights = alpha * trans
    color = weights @ colors if weights.size else np.zeros(3)
    return CompositeResult(color=color, acc=float(weights.sum()), weights=weights)


def contract_nerfpp(x) -> np.ndarray:
    """Inverted-sphere contraction: |x| >= 1 maps to (unit direction, 1/r)."""
    x = np.asarray(x, dtype=np.float64)
    r = float(np.linalg.norm(x))
    if r < 1.0:
        raise InsideUnitSphere(f"|x| = {r:g} < 1")
    return np.append(x / r, 1.0 / r)


def distortion_reg(s, w) -> float:
    """Distortion penalty pushing compositing weights toward sparsity.

    s are N+1 increasing sample boundaries, w the N nonnegative weights;
    the value is the weighted pairwise midpoint spread plus one third of the
    weighted self-interval term.
    """
    s = np.asarray(s, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if s.size != w.size + 1:
        raise LengthMismatch("need len(s) == len(w) + 1")
    if np.any(np.diff(s) <= 0):
        raise ValueError("s must be strictly increasing")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    mids = 0.5 * (s[:-1] + s[1:])
    cross = float(w @ np.abs(mids[:, None] - mids[None, :]) @ w)
    self_term = float(np.sum(w * w * np.diff(s))) / 3.0
    return cross + self_term


def prune_rays_in_boxes(samples, sigmas, boxes: Sequence[OrientedBox3]) -> np.ndarray:
    """Replace the density of samples inside any box with the suppression
    value (exact deletion after the compositing clamp). Faces count as
    inside."""
    sigmas = np.array(sigmas, dtype=np.float64, copy=True)
    if len(boxes) == 0 or sigmas.size == 0:
        return sigmas
    pts = np.atleast_2d(np.asarray(samples, dtype=np.float64))
    inside = np.zeros(sigmas.size, dtype=bool)
    for box in boxes:
        inside |= box.contains(pts)
    sigmas[inside] = SUPPRESSION_SIGMA
    return sigmas


def _sphere_exit_t(origin: np.ndarray, direction: np.ndarray) -> float:
    """Positive ray parameter where |origin + t * direction| = 1."""
    b = float(origin @ direction)
    c = float(origin @ origin) - 1.0
    return -b + math.sqrt(b * b - c)


def _radius_to_t(origin: np.ndarray, direction: np.ndarray, radius) -> np.ndarray:
    """Outgoing ray parameter where the point reaches the given radius."""
    b = float(origin @ direction)
    c = float(origin @ origin)
    return -b + np.sqrt(b * b + np.asarray(radius) ** 2 - c)


def _sample_pdf(
    edges: np.ndarray, weights: np.ndarray, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Inverse-CDF draws of n values from a piecewise-constant pdf over bins."""
    w = np.maximum(weights, 0.0) + 1e-9
    cdf = np.concatenate([[0.0], np.cumsum(w / w.sum())])
    u = _stratified(rng, 0.0, 1.0, n)
    return np.interp(u, cdf, edges)


class RenderResult(NamedTuple):
    color: np.ndarray
    acc: float
    acc_near: float


def _render_merged(
    ray: Ray,
    cfg: RenderConfig,
    near_field: RadianceField,
    far_field: RadianceField,
    boxes: Sequence[OrientedBox3] = (),
    object_field: Optional[RadianceField] = None,
) -> RenderResult:
    """Single merged-stream rendering pass behind every public renderer."""
    if float(ray.origin @ ray.origin) >= 1.0:
        raise OriginOutsideSphere("ray origin must lie inside the unit sphere")
    rng = np.random.default_rng(cfg.seed)
    t_sphere = _sphere_exit_t(ray.origin, ray.direction)

    # rng draws happen unconditionally, in a fixed order, so configurations
    # that share a seed share every sample position
    near_jitter = rng.random(cfg.n_coarse)
    far_jitter = rng.random(cfg.n_coarse)
    n = cfg.n_coarse
    if t_sphere > cfg.near:
        near_ts = cfg.near + (np.arange(n) + near_jitter) * (t_sphere - cfg.near) / n
        near_deltas = np.append(np.diff(near_ts), t_sphere - near_ts[-1])
    else:
        near_ts = np.zeros(0)
        near_deltas = np.zeros(0)
    # descending inverse radius over (0, 1]: first sample sits just outside
    # the sphere, later samples stride toward infinity
    u = (n - np.arange(n) - far_jitter) / n
    far_ts = _radius_to_t(ray.origin, ray.direction, 1.0 / u)
    if n >= 2:
        far_deltas = np.append(np.diff(far_ts), far_ts[-1] - far_ts[-2])
    else:
        far_deltas = np.array([max(far_ts[0] - t_sphere, 1e-12)])

    if cfg.n_fine > 0:
        coarse = _compose_streams(
            ray, near_ts, near_deltas, far_ts, far_deltas,
            near_field, far_field, boxes, object_field,
        )
        near_w = coarse.weights[coarse.ranks == _NEAR]
        if near_ts.size >= 2:
            edges = np.concatenate([[cfg.near], 0.5 * (near_ts[:-1] + near_ts[1:]), [t_sphere]])
            fine = np.sort(_sample_pdf(edges, near_w, cfg.n_fine, rng))
            near_ts = np.unique(np.concatenate([near_ts, fine]))
            near_deltas = np.append(np.diff(near_ts), t_sphere - near_ts[-1])
            near_deltas = np.maximum(near_deltas, 1e-12)
        far_w = coarse.weights[coarse.ranks == _FAR]
        u_asc = u[::-1]
        edges_u = np.concatenate([[0.0], 0.5 * (u_asc[:-1] + u_asc[1:]), [1.0]])
        fine_u = _sample_pdf(edges_u, far_w[::-1], cfg.n_fine, rng)
        fine_u = fine_u[fine_u > 1e-9]
        u_all = np.unique(np.concatenate([u_asc, fine_u]))[::-1]
        far_ts = _radius_to_t(ray.origin, ray.direction, 1.0 / u_all)
        far_deltas = np.maximum(np.append(np.diff(far_ts), far_ts[-1] - far_ts[-2]), 1e-12)

    merged = _compose_streams(
        ray, near_ts, near_deltas, far_ts, far_deltas,
        near_field, far_field, boxes, object_field,
    )
    acc_near = float(merged.weights[merged.ranks == _NEAR].sum())
    return RenderResult(color=merged.color, acc=merged.acc, acc_near=acc_near)


class _Streams(NamedTuple):
    color: np.ndarray
    acc: float
    weights: np.ndarray
    ranks: np.ndarray


def _compose_streams(
    ray, near_ts, near_deltas, far_ts, far_deltas,
    near_field, far_field, boxes, object_field,
) -> _Streams:
    dirs_near = np.tile(ray.direction, (near_ts.size, 1))
    near_pts = ray.at(near_ts)
    near_colors, near_sigmas = near_field.eval(near_pts, dirs_near)
    near_sigmas = np.asarray(near_sigmas, dtype=np.float64)

    obj_ts = np.zeros(0)
    obj_deltas = np.zeros(0)
    obj_colors = np.zeros((0, 3))
    obj_sigmas = np.zeros(0)
    if boxes:
        near_sigmas = prune_rays_in_boxes(near_pts, near_sigmas, boxes)
        if object_field is not None:
            inside = np.zeros(near_ts.size, dtype=bool)
            for box in boxes:
                inside |= box.contains(near_pts)
            if inside.any():
                obj_ts = near_ts[inside]
                obj_deltas = near_deltas[inside]
                obj_colors, obj_sigmas = object_field.eval(
                    near_pts[inside], dirs_near[inside]
                )

    far_colors, far_sigmas = far_field.eval(
        ray.at(far_ts), np.tile(ray.direction, (far_ts.size, 1))
    )

    t_all = np.concatenate([obj_ts, near_ts, far_ts])
    ranks = np.concatenate(
        [
            np.full(obj_ts.size, _OBJECT),
            np.full(near_ts.size, _NEAR),
            np.full(far_ts.size, _FAR),
        ]
    )
    order = np.lexsort((ranks, t_all))
    colors = np.concatenate([np.atleast_2d(obj_colors), np.atleast_2d(near_colors),
                             np.atleast_2d(far_colors)])
    sigmas = np.concatenate([np.asarray(obj_sigmas).ravel(), near_sigmas.ravel(),
                             np.asarray(far_sigmas).ravel()])
    deltas = np.concatenate([obj_deltas, near_deltas, far_deltas])
    comp = composite(colors[order], sigmas[order], deltas[order])
    return _Streams(comp.color, comp.acc, comp.weights, ranks[order])


def render_ray_nearfar(
    near_field: RadianceField,
    far_field: RadianceField,
    ray: Ray,
    cfg: RenderConfig,
) -> tuple[np.ndarray, float]:
    """Render one ray with the near/far decomposition.

    Near samples cover [near, t_sphere]; far samples continue past the
    unit-sphere exit on the inverse-radius ladder. Far radiance is seen
    through the near transmittance. Returns (color, near accumulation).
    """
    res = _render_merged(ray, cfg, near_field, far_field)
    return res.color, res.acc_near


def render_composed(
    object_field: Optional[RadianceField],
    near_field: RadianceField,
    far_field: RadianceField,
    boxes: Sequence[OrientedBox3],
    ray: Ray,
    cfg: RenderConfig,
) -> np.ndarray:
    """Editable scene rendering: the object field is queried only inside the
    boxes, the near background is pruned there, and all three streams are
    composited along one merged sample list."""
    res = _render_merged(ray, cfg, near_field, far_field, boxes, object_field)
    return res.color


def render_full(
    ray: Ray,
    cfg: RenderConfig,
    near_field: RadianceField,
    far_field: RadianceField,
    boxes: Sequence[OrientedBox3] = (),
    object_field: Optional[RadianceField] = None,
) -> RenderResult:
    """render_composed plus the accumulations (used by the CLI for image
    metrics)."""
    return _render_merged(ray, cfg, near_field, far_field, boxes, object_field)
