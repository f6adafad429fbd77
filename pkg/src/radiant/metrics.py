"""Evaluation metrics: Chamfer distance, yaw-box IoU and detection AP,
category-level pose errors/AP with symmetry handling, voxel-label metrics,
and navigation metrics (SR / SPL / nDTW / TL / NE).

Definitions implemented here:
  * chamfer(A, B) = mean_A min ||a-b||^2 + mean_B min ||b-a||^2
  * box IoU = exact convex xy-polygon intersection x z-interval overlap
  * AP = area under the all-point interpolated precision-recall curve with
    greedy score-descending one-to-one matching
  * pose error = geodesic rotation angle (minimized over rotations about the
    symmetry axis when one is given) and Euclidean translation error in cm
  * SPL = SR * L / max(P, L); nDTW = exp(-DTW / (|ref| * threshold))
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .core_math import as_vec3, check_rotation, skew
from .errors import DimsMismatch, EmptyPath, EmptySet, LabelOutOfRange


@dataclass
class OrientedBox3:
    """3D box with yaw-only rotation about world z.

    size is the full extent along the box axes; score is None for ground
    truth. Containment tests treat faces as inside (closed box).
    """

    center: np.ndarray
    size: np.ndarray
    yaw: float = 0.0
    label: str = ""
    score: Optional[float] = None

    def __post_init__(self):
        self.center = as_vec3(self.center)
        self.size = as_vec3(self.size)
        if not np.all(self.size > 0):
            raise ValueError("box size must be positive")
        if not (-math.pi < self.yaw <= math.pi):
            self.yaw = math.atan2(math.sin(self.yaw), math.cos(self.yaw))

    @property
    def volume(self) -> float:
        return float(np.prod(self.size))

    def corners2d(self) -> np.ndarray:
        """Footprint corners in xy, counter-clockwise, shape (4, 2)."""
        hx, hy = self.size[0] / 2.0, self.size[1] / 2.0
        local = np.array([[-hx, -hy], [hx, -hy], [hx, hy], [-hx, hy]])
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        rot = np.array([[c, -s], [s, c]])
        return local @ rot.T + self.center[:2]

    def corners(self) -> np.ndarray:
        """All 8 corners, shape (8, 3)."""
        xy = self.corners2d()
        z0 = self.center[2] - self.size[2] / 2.0
        z1 = self.center[2] + self.size[2] / 2.0
        bottom = np.column_stack([xy, np.full(4, z0)])
        top = np.column_stack([xy, np.full(4, z1)])
        return np.vstack([bottom, top])

    def contains(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        d = pts - self.center
        c, s = math.cos(self.yaw), math.sin(self.yaw)
        lx = c * d[:, 0] + s * d[:, 1]
        ly = -s * d[:, 0] + c * d[:, 1]
        half = self.size / 2.0
        return (
            (np.abs(lx) <= half[0])
            & (np.abs(ly) <= half[1])
            & (np.abs(d[:, 2]) <= half[2])
        )


@dataclass
class PoseRecord:
    """Category-level object pose: rotation, translation (m), 1D scale."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0
    label: str = ""
    score: Optional[float] = None

    def __post_init__(self):
        self.rotation = check_rotation(self.rotation)
        self.translation = as_vec3(self.translation)
        if self.scale <= 0:
            raise ValueError("scale must be positive")


@dataclass
class Trajectory:
    """Agent path against a reference path and a goal position."""

    positions: np.ndarray
    reference: np.ndarray
    goal: np.ndarray
    success_threshold: float = 3.0

    def __post_init__(self):
        self.positions = np.atleast_2d(np.asarray(self.positions, dtype=np.float64))
        self.reference = np.atleast_2d(np.asarray(self.reference, dtype=np.float64))
        self.goal = as_vec3(self.goal)
        if self.positions.size == 0 or self.reference.size == 0:
            raise EmptyPath("trajectory paths must be nonempty")


class NavMetrics(NamedTuple):
    sr: float
    spl: float
    ndtw: float
    tl: float
    ne: float


def chamfer(a, b) -> float:
    """Symmetric Chamfer distance: both directional means of squared
    nearest-neighbor distances, summed."""
    a = np.atleast_2d(np.asarray(a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(b, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise EmptySet("chamfer needs two nonempty point sets")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(np.mean(d_ab**2) + np.mean(d_ba**2))


def _polygon_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _clip_polygon(poly: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Sutherland-Hodgman step: clip poly against the half-plane left of a->b."""
    if len(poly) == 0:
        return poly
    edge = b - a
    rel = poly - a
    side = edge[0] * rel[:, 1] - edge[1] * rel[:, 0]  # >= 0: inside (CCW clip)
    out = []
    n = len(poly)
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        si, sj = side[i], side[j]
        if si >= 0:
            out.append(pi)
        if (si >= 0) != (sj >= 0):
            t = si / (si - sj)
            out.append(pi + t * (pj - pi))
    return np.array(out) if out else np.zeros((0, 2))


def iou3d(a: OrientedBox3, b: OrientedBox3) -> float:
    """Exact IoU of two yaw boxes: polygon clipping in xy times z overlap."""
    poly = a.corners2d()
    clip = b.corners2d()
    for i in range(4):
        poly = _clip_polygon(poly, clip[i], clip[(i + 1) % 4])
        if len(poly) == 0:
            break
    inter_xy = _polygon_area(poly)
    z_lo = max(a.center[2] - a.size[2] / 2.0, b.center[2] - b.size[2] / 2.0)
    z_hi = min(a.center[2] + a.size[2] / 2.0, b.center[2] + b.size[2] / 2.0)
    inter = inter_xy * max(0.0, z_hi - z_lo)
    union = a.volume + b.volume - inter
    return inter / union if union > 0 else 0.0


def iou3d_monte_carlo(
    a: OrientedBox3, b: OrientedBox3, n_samples: int = 10**6, seed: int = 0
) -> tuple[float, float]:
    """Monte Carlo IoU estimate with its standard error.

    Fallback for box parameterizations without an exact intersection;
    samples the joint AABB and uses the correlated ratio estimator
    IoU = |in both| / |in either|.
    """
    corners = np.vstack([a.corners(), b.corners()])
    lo, hi = corners.min(axis=0), corners.max(axis=0)
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lo, hi, size=(n_samples, 3))
    in_a = a.contains(pts)
    in_b = b.contains(pts)
    n_union = int(np.count_nonzero(in_a | in_b))
    if n_union == 0:
        return 0.0, 0.0
    n_inter = int(np.count_nonzero(in_a & in_b))
    p = n_inter / n_union
    stderr = math.sqrt(p * (1.0 - p) / n_union)
    return p, stderr


def _average_precision(tp_sorted: np.ndarray, n_gt: int) -> tuple[float, float]:
    """All-point interpolated AP and final recall from score-sorted TP flags."""
    if n_gt == 0 or tp_sorted.size == 0:
        return 0.0, 0.0
    tp_cum = np.cumsum(tp_sorted)
    recall = tp_cum / n_gt
    precision = tp_cum / np.arange(1, tp_sorted.size + 1)
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    ap = float(np.sum((recall - prev) * envelope))
    return ap, float(recall[-1])


def _sorted_by_score(preds: Sequence) -> list:
    order = np.argsort([-p.score for p in preds], kind="stable")
    return [preds[i] for i in order]


def detection_ap(
    preds: Sequence[OrientedBox3],
    gts: Sequence[OrientedBox3],
    iou_thresh: float,
) -> tuple[float, float]:
    """Detection AP and recall at one IoU threshold.

    Predictions are matched greedily in descending score to the unmatched
    same-label ground truth with the highest IoU; a match requires
    IoU >= iou_thresh.
    """
    if not (0.0 < iou_thresh < 1.0):
        raise ValueError("iou_thresh must lie in (0, 1)")
    matched = [False] * len(gts)
    tp = []
    for p in _sorted_by_score(preds):
        best, best_iou = -1, 0.0
        for gi, g in enumerate(gts):
            if matched[gi] or g.label != p.label:
                continue
            v = iou3d(p, g)
            if v > best_iou:
                best, best_iou = gi, v
        if best >= 0 and best_iou >= iou_thresh:
            matched[best] = True
            tp.append(1.0)
        else:
            tp.append(0.0)
    return _average_precision(np.array(tp), len(gts))


def pose_errors(
    pred: PoseRecord, gt: PoseRecord, symmetric_axis=None
) -> tuple[float, float]:
    """(rotation error in degrees, translation error in cm).

    With a symmetry axis the rotation error is minimized over all rotations
    about that axis inserted between the two poses, which makes it invariant
    to pre-multiplying either pose by any rotation about the axis.
    """
    m = gt.rotation @ pred.rotation.T
    if symmetric_axis is None:
        c = (np.trace(m) - 1.0) / 2.0
        angle = math.acos(min(1.0, max(-1.0, c)))
    else:
        a = as_vec3(symmetric_axis)
        if abs(np.linalg.norm(a) - 1.0) > 1e-6:
            raise ValueError("symmetry axis must be unit length")
        # maximize tr(Rot(a, phi) @ m) = A cos(phi) + B sin(phi) + a.m.a
        big_a = np.trace(m) - a @ m @ a
        big_b = np.trace(skew(a) @ m)
        best_trace = math.hypot(big_a, big_b) + a @ m @ a
        c = (best_trace - 1.0) / 2.0
        angle = math.acos(min(1.0, max(-1.0, c)))
    t_err = float(np.linalg.norm(pred.translation - gt.translation)) * 100.0
    return math.degrees(angle), t_err


def pose_ap(
    preds: Sequence[PoseRecord],
    gts: Sequence[PoseRecord],
    deg_thresh: float,
    cm_thresh: float,
    symmetric_axes: Optional[dict] = None,
) -> float:
    """Pose AP at a (degrees, cm) threshold pair.

    symmetric_axes maps class labels to their symmetry axis; matching is
    greedy in descending score, both errors must fall strictly below their
    thresholds, and ties pick the smallest rotation error.
    """
    if deg_thresh <= 0 or cm_thresh <= 0:
        raise ValueError("thresholds must be positive")
    symmetric_axes = symmetric_axes or {}
    matched = [False] * len(gts)
    tp = []
    for p in _sorted_by_score(preds):
        axis = symmetric_axes.get(p.label)
        best, best_err = -1, (math.inf, math.inf)
        for gi, g in enumerate(gts):
            if matched[gi] or g.label != p.label:
                continue
            deg, cm = pose_errors(p, g, axis)
            if deg < deg_thresh and cm < cm_thresh and (deg, cm) < best_err:
                best, best_err = gi, (deg, cm)
        if best >= 0:
            matched[best] = True
            tp.append(1.0)
        else:
            tp.append(0.0)
    ap, _ = _average_precision(np.array(tp), len(gts))
    return ap


def voxel_label_metrics(pred, gt, n_classes: int) -> tuple[float, float, float]:
    """(mIoU, mAcc, Acc) for integer label grids.

    Per-class IoU and accuracy are averaged over the classes present in the
    ground truth; Acc is the overall fraction of correct voxels.
    """
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise DimsMismatch(f"{pred.shape} vs {gt.shape}")
    if gt.size == 0:
        raise DimsMismatch("label grids must be nonempty")
    for name, arr in (("pred", pred), ("gt", gt)):
        if arr.min() < 0 or arr.max() >= n_classes:
            raise LabelOutOfRange(f"{name} labels outside [0, {n_classes})")
    p = pred.ravel().astype(np.int64)
    g = gt.ravel().astype(np.int64)
    confusion = np.bincount(g * n_classes + p, minlength=n_classes * n_classes)
    confusion = confusion.reshape(n_classes, n_classes)
    tp = np.diag(confusion).astype(np.float64)
    gt_count = confusion.sum(axis=1).astype(np.float64)
    pred_count = confusion.sum(axis=0).astype(np.float64)
    present = gt_count > 0
    union = gt_count + pred_count - tp
    with np.errstate(invalid="ignore", divide="ignore"):
        iou = np.where(union > 0, tp / union, 0.0)
        acc_c = np.where(gt_count > 0, tp / gt_count, 0.0)
    m_iou = float(iou[present].mean())
    m_acc = float(acc_c[present].mean())
    acc = float(tp.sum() / max(g.size, 1))
    return m_iou, m_acc, acc


def _path_length(path: np.ndarray) -> float:
    if len(path) < 2:
        return 0.0
    return float(np.linalg.norm(np.diff(path, axis=0), axis=1).sum())


def dtw_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Standard DTW with Euclidean point distance."""
    n, m = len(a), len(b)
    cost = np.full((n + 1, m + 1), np.inf)
    cost[0, 0] = 0.0
    dists = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            cost[i, j] = dists[i - 1, j - 1] + min(
                cost[i - 1, j], cost[i, j - 1], cost[i - 1, j - 1]
            )
    return float(cost[n, m])


def nav_metrics(t: Trajectory) -> NavMetrics:
    """Navigation episode metrics (SR, SPL, nDTW, TL, NE)."""
    ne = float(np.linalg.norm(t.positions[-1] - t.goal))
    sr = 1.0 if ne < t.success_threshold else 0.0
    tl = _path_length(t.positions)
    ref_len = _path_length(t.reference)
    denom = max(tl, ref_len)
    spl = sr if denom == 0.0 else sr * ref_len / denom
    dtw = dtw_distance(t.positions, t.reference)
    ndtw = math.exp(-dtw / (len(t.reference) * t.success_threshold))
    return NavMetrics(sr=sr, spl=spl, ndtw=ndtw, tl=tl, ne=ne)
