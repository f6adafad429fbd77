"""Command-line front end.

Subcommands are deterministic given (inputs, seed): primary outputs are
byte-reproducible, with wall-clock fields in stats/bench reports being the
only exception. Exit codes: 0 success, 1 usage error, 2 I/O error, 3 domain
error (module errors, reported as structured JSON on stderr). stdout carries
only primary payloads or output paths.

RADIANT_THREADS caps internal parallelism (rendering rows); default is the
machine's core count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import io
from .core_math import Aabb, Ray, generate_ray_arrays
from .errors import FileFormatError, RadiantError
from .fields import field_from_spec, make_analytic_sdf
from .gridsample import AXIS_DIRECTIONS, sample_grid
from .masking import apply_mask, patchify, random_mask
from .metrics import detection_ap, nav_metrics, pose_ap, voxel_label_metrics
from .octree import LodConfig, dense_extract, extract_surface
from .projmaps import SemanticMapConfig, build_semantic_map
from .render import RenderConfig, render_full

SDF_PRESETS = {
    "sphere": {"type": "sphere", "center": [0, 0, 0], "radius": 0.5},
    "box": {"type": "box", "center": [0, 0, 0], "half_extents": [0.35, 0.3, 0.25]},
    "union": {
        "type": "union",
        "shapes": [
            {"type": "sphere", "center": [-0.35, 0, 0], "radius": 0.3},
            {"type": "box", "center": [0.35, 0, 0], "half_extents": [0.25, 0.25, 0.25]},
        ],
    },
}

FIELD_PRESETS = {
    "sphere": {"type": "ball", "color": [1.0, 0.6, 0.2], "sigma": 40.0, "radius": 0.5},
    "gaussian": {"type": "gaussian", "color": [0.3, 0.5, 1.0], "amplitude": 20.0,
                 "scale": 0.25},
    "constant": {"type": "constant", "color": [0.5, 0.5, 0.5], "sigma": 1.0},
}


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _emit_error(kind: str, exc: Exception) -> None:
    print(json.dumps({"error": kind, "type": type(exc).__name__,
                      "message": str(exc)}), file=sys.stderr)


def _require_inputs(*paths) -> None:
    for p in paths:
        if p is not None and not Path(p).exists():
            raise FileNotFoundError(f"input file not found: {p}")


def _prepare_output(path, force: bool) -> Path:
    out = Path(path)
    if out.exists() and not force:
        raise FileExistsError(f"{out} exists; pass --force to overwrite")
    if out.parent and not out.parent.exists():
        raise FileNotFoundError(f"output directory does not exist: {out.parent}")
    return out


def _parse_dims(text: str) -> tuple[int, int, int]:
    parts = [int(t) for t in text.split(",")]
    if len(parts) == 1:
        parts = parts * 3
    if len(parts) != 3 or any(p < 1 for p in parts):
        raise ValueError(f"bad dims {text!r}; expected N or X,Y,Z")
    return tuple(parts)


def _parse_bounds(text: str) -> Aabb:
    vals = [float(t) for t in text.split(",")]
    if len(vals) != 6:
        raise ValueError(f"bad bounds {text!r}; expected x0,y0,z0,x1,y1,z1")
    return Aabb(vals[:3], vals[3:])


def _load_spec(arg: str, presets: dict) -> dict:
    """Resolve a preset name or a JSON file path into a spec dict."""
    if arg in presets:
        return json.loads(json.dumps(presets[arg]))
    _require_inputs(arg)
    with open(arg) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as e:
            raise FileFormatError(f"{arg}: {e}") from None


def _splitmix_scalar(*parts: int) -> int:
    x = 0
    for p in parts:
        x = (x + int(p)) & 0xFFFFFFFFFFFFFFFF
        x = (x + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
        x = ((x ^ (x >> 30)) * 0xBF58476D1E4357B3) & 0xFFFFFFFFFFFFFFFF
        x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
        x = x ^ (x >> 31)
    return x


def _n_threads() -> int:
    env = os.environ.get("RADIANT_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


# ---------------------------------------------------------------------------
# subcommands


def _cmd_voxelize(args) -> None:
    spec = _load_spec(args.field, FIELD_PRESETS)
    if spec.get("type") == "grid":
        _require_inputs(spec.get("path"))
    out = _prepare_output(args.out, args.force)
    field = field_from_spec(spec)
    bounds = _parse_bounds(args.bounds)
    if args.cameras:
        _require_inputs(args.cameras)
        doc = io.load_versioned_json(args.cameras)
        poses = [io.pose_from_json(c) for c in doc["cameras"]]
        directions = np.array([p.rotation @ [0.0, 0.0, 1.0] for p in poses])
    else:
        directions = AXIS_DIRECTIONS
    grid = sample_grid(field, bounds, _parse_dims(args.dims), directions, args.delta)
    io.write_nfvg(out, grid)
    print(out)


def _cmd_extract_surface(args) -> None:
    shape = _load_spec(args.shape, SDF_PRESETS)
    out = _prepare_output(args.out, args.force)
    stats_path = Path(args.stats) if args.stats else out.with_suffix(out.suffix + ".stats.json")
    if stats_path.exists() and not args.force:
        raise FileExistsError(f"{stats_path} exists; pass --force to overwrite")
    f = make_analytic_sdf(shape)
    cfg = LodConfig(
        lod_start=args.lod_start,
        lod_end=args.lod_end,
        bounds=_parse_bounds(args.bounds),
        literal_occupancy=args.literal_occupancy,
    )
    samples, stats = extract_surface(f, cfg)
    io.write_ply(out, samples)
    io.dump_json(stats_path, {
        "evals_per_level": {str(k): v for k, v in stats.evals_per_level.items()},
        "total_sdf_evals": stats.total_sdf_evals,
        "surface_points": stats.surface_points,
        "wall_time": stats.wall_time,
        "no_surface": stats.no_surface,
        "dropped_points": stats.dropped_points,
    })
    print(out)


def _cmd_mask(args) -> None:
    _require_inputs(args.grid)
    out = _prepare_output(args.out, args.force)
    mask_out = _prepare_output(args.mask_out, args.force)
    grid = io.read_nfvg(args.grid)
    patches = patchify(grid.dims, args.patch)
    mask = random_mask(patches.n_patches, args.ratio, args.seed,
                       patch_size=args.patch, grid_dims=grid.dims)
    io.write_nfvg(out, apply_mask(grid, mask))
    io.dump_json(mask_out, {
        "p": mask.patch_size,
        "dims": list(grid.dims),
        "seed": mask.seed,
        "ratio": mask.ratio,
        "masked_indices": [int(i) for i in mask.masked_indices()],
    })
    print(out)


def _render_image(k, pose, cfg, seed, cam_index, near_field, far_field, boxes,
                  object_field):
    origins, dirs = generate_ray_arrays(k, pose)
    h, w = k.height, k.width
    img = np.zeros((h, w, 3))
    accs = np.zeros(h * w)

    def render_row(v):
        for u in range(w):
            idx = v * w + u
            pix_cfg = replace(cfg, seed=_splitmix_scalar(seed, cam_index, idx))
            res = render_full(Ray(origins[idx], dirs[idx]), pix_cfg,
                              near_field, far_field, boxes, object_field)
            img[v, u] = np.clip(res.color, 0.0, 1.0)
            accs[idx] = res.acc

    n = _n_threads()
    if n <= 1:
        for v in range(h):
            render_row(v)
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            list(pool.map(render_row, range(h)))
    return img, float(accs.mean())


def _cmd_render(args) -> None:
    _require_inputs(args.scene)
    scene_dir = Path(args.scene).parent
    doc = io.load_versioned_json(args.scene)

    def build_field(key):
        spec = doc.get(key)
        if spec is None:
            return None
        if spec.get("type") == "grid":
            spec = {**spec, "path": str(scene_dir / spec["path"])}
            _require_inputs(spec["path"])
        return field_from_spec(spec)

    near_field = build_field("near_field") or field_from_spec(
        {"type": "constant", "color": [0, 0, 0], "sigma": 0.0})
    far_field = build_field("far_field") or field_from_spec(
        {"type": "constant", "color": [0, 0, 0], "sigma": 0.0})
    object_field = build_field("object_field")
    boxes = [io.box_from_json(b) for b in doc.get("boxes", [])]
    cameras = doc.get("cameras", [])
    if not cameras:
        raise RadiantError("scene has no cameras")
    cfg = RenderConfig(
        near=float(doc.get("near", 0.02)),
        far=float(doc.get("far", 3.0)),
        n_coarse=int(doc.get("n_coarse", 64)),
        n_fine=int(doc.get("n_fine", 0)),
        seed=args.seed,
    )

    image_paths = [
        _prepare_output(f"{args.out}_{ci:03d}.ppm", args.force)
        for ci in range(len(cameras))
    ]
    metrics_path = _prepare_output(f"{args.out}_metrics.json", args.force)
    outputs = []
    for ci, (cam, path) in enumerate(zip(cameras, image_paths)):
        k = io.intrinsics_from_json(cam["intrinsics"])
        pose = io.pose_from_json(cam["pose"])
        img, mean_acc = _render_image(k, pose, cfg, args.seed, ci,
                                      near_field, far_field, boxes, object_field)
        io.write_ppm(path, img)
        outputs.append({"image": path.name, "mean_acc": mean_acc})
        print(path)
    io.dump_json(metrics_path, {"images": outputs})


def _cmd_eval_detect(args) -> None:
    _require_inputs(args.pred, args.gt)
    out = _prepare_output(args.out, args.force)
    preds = [io.box_from_json(b) for b in io.load_versioned_json(args.pred)["boxes"]]
    gts = [io.box_from_json(b) for b in io.load_versioned_json(args.gt)["boxes"]]
    thresholds = [float(t) for t in args.iou_thresholds.split(",")]
    results = {}
    labels = sorted({b.label for b in gts} | {b.label for b in preds})
    for thresh in thresholds:
        ap, recall = detection_ap(preds, gts, thresh)
        per_class = {}
        for label in labels:
            p = [b for b in preds if b.label == label]
            g = [b for b in gts if b.label == label]
            c_ap, c_recall = detection_ap(p, g, thresh)
            per_class[label] = {"ap": c_ap, "recall": c_recall}
        results[f"{thresh:g}"] = {"ap": ap, "recall": recall, "per_class": per_class}
    io.dump_json(out, {"iou_thresholds": thresholds, "results": results})
    print(out)


def _cmd_eval_pose(args) -> None:
    _require_inputs(args.pred, args.gt)
    out = _prepare_output(args.out, args.force)
    preds = [io.pose_record_from_json(p)
             for p in io.load_versioned_json(args.pred)["poses"]]
    gts = [io.pose_record_from_json(p) for p in io.load_versioned_json(args.gt)["poses"]]
    axis = np.asarray([float(t) for t in args.symmetry_axis.split(",")])
    sym_classes = [c for c in args.symmetric_classes.split(",") if c]
    axes = {c: axis for c in sym_classes}
    results = {}
    labels = sorted({p.label for p in gts} | {p.label for p in preds})
    for pair in args.pose_thresholds.split(","):
        deg_s, cm_s = pair.split(":")
        deg, cm = float(deg_s), float(cm_s)
        ap = pose_ap(preds, gts, deg, cm, axes)
        per_class = {}
        for label in labels:
            p = [x for x in preds if x.label == label]
            g = [x for x in gts if x.label == label]
            per_class[label] = {"ap": pose_ap(p, g, deg, cm, axes)}
        results[f"{deg:g}deg{cm:g}cm"] = {"ap": ap, "per_class": per_class}
    io.dump_json(out, {"pose_thresholds": args.pose_thresholds.split(","),
                       "results": results})
    print(out)


def _labels_from_doc(doc: dict, base: Path) -> tuple[np.ndarray, int]:
    path = base / doc["labels_file"]
    _require_inputs(path)
    grid = io.read_nfvg(path)
    if grid.channels != 1:
        raise RadiantError("label grids must have a single channel")
    return np.rint(grid.data[..., 0]).astype(np.int64), int(doc["n_classes"])


def _cmd_eval_voxels(args) -> None:
    _require_inputs(args.pred, args.gt)
    out = _prepare_output(args.out, args.force)
    pred_doc = io.load_versioned_json(args.pred)
    gt_doc = io.load_versioned_json(args.gt)
    pred, n_pred = _labels_from_doc(pred_doc, Path(args.pred).parent)
    gt, n_gt = _labels_from_doc(gt_doc, Path(args.gt).parent)
    if n_pred != n_gt:
        raise RadiantError(f"n_classes disagree: {n_pred} vs {n_gt}")
    m_iou, m_acc, acc = voxel_label_metrics(pred, gt, n_gt)
    io.dump_json(out, {"mIoU": m_iou, "mAcc": m_acc, "Acc": acc})
    print(out)


def _cmd_eval_nav(args) -> None:
    _require_inputs(args.trajectory)
    out = _prepare_output(args.out, args.force)
    t = io.trajectory_from_json(io.load_versioned_json(args.trajectory)["trajectory"])
    m = nav_metrics(t)
    io.dump_json(out, {"SR": m.sr, "SPL": m.spl, "nDTW": m.ndtw, "TL": m.tl, "NE": m.ne})
    print(out)


def _cmd_bench_octree(args) -> None:
    out = _prepare_output(args.out, args.force)
    shape = _load_spec(args.shape, SDF_PRESETS)
    f = make_analytic_sdf(shape)
    rows = []
    for res in (40, 50, 60):
        t0 = time.perf_counter()
        samples = dense_extract(f, res, args.band)
        rows.append({
            "grid_type": "ordinary",
            "resolution": str(res),
            "input_points": res**3,
            "output_points": len(samples),
            "time_s": time.perf_counter() - t0,
        })
    ratios = []
    for i, lod in enumerate((5, 6, 7)):
        samples, stats = extract_surface(f, LodConfig(lod_start=3, lod_end=lod))
        matched = (1 << lod) ** 3
        ratios.append(stats.total_sdf_evals / matched)
        rows.append({
            "grid_type": "octree",
            "resolution": f"LoD{lod}",
            "input_points": stats.total_sdf_evals,
            "output_points": len(samples),
            "time_s": stats.wall_time,
            "eval_ratio_matched": ratios[-1],
        })
        if stats.total_sdf_evals >= rows[i]["input_points"]:
            raise RadiantError(
                f"octree LoD{lod} used {stats.total_sdf_evals} evals, not below "
                f"the ordinary {rows[i]['resolution']} grid"
            )
    if not (ratios[0] > ratios[1] > ratios[2]):
        raise RadiantError(f"matched eval ratios not strictly decreasing: {ratios}")
    io.dump_json(out, {"shape": args.shape, "band": args.band, "rows": rows,
                       "eval_ratios_matched": ratios})
    print(out)


def _cmd_semmap(args) -> None:
    _require_inputs(args.depth, args.semantics, args.intrinsics, args.pose)
    out = _prepare_output(args.out, args.force)
    depth = np.load(args.depth)
    semantics = np.load(args.semantics)
    k = io.intrinsics_from_json(io.load_versioned_json(args.intrinsics))
    pose = io.pose_from_json(io.load_versioned_json(args.pose))
    cfg = SemanticMapConfig(
        r=args.half_extent,
        cell_size=args.cell_size,
        height_min=args.height_min,
        height_max=args.height_max,
        classes=args.classes,
    )
    smap = build_semantic_map(depth, semantics, k, pose, cfg)
    io.write_nfvg(out, io.semantic_map_to_grid(smap))
    print(out)


def build_parser() -> _Parser:
    parser = _Parser(prog="radiant", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, seed=True):
        p.add_argument("--force", action="store_true",
                       help="overwrite existing outputs")
        if seed:
            p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("voxelize", help="sample a radiance field into an NFVG grid")
    p.add_argument("--field", required=True,
                   help=f"preset ({', '.join(FIELD_PRESETS)}) or field JSON path")
    p.add_argument("--dims", default="160", help="N or X,Y,Z voxel counts")
    p.add_argument("--bounds", default="-1,-1,-1,1,1,1")
    p.add_argument("--delta", type=float, default=0.01,
                   help="preset distance for the alpha conversion")
    p.add_argument("--cameras", help="camera JSON; view axes replace the "
                                     "default 6 axis directions")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_voxelize)

    p = sub.add_parser("extract-surface", help="octree SDF surface extraction to PLY")
    p.add_argument("--shape", required=True,
                   help=f"preset ({', '.join(SDF_PRESETS)}) or shape JSON path")
    p.add_argument("--lod-start", type=int, default=3)
    p.add_argument("--lod-end", type=int, default=6)
    p.add_argument("--bounds", default="-1,-1,-1,1,1,1")
    p.add_argument("--literal-occupancy", action="store_true",
                   help="keep cells with signed sdf < cell size instead of |sdf|")
    p.add_argument("--stats", help="stats JSON path (default: <out>.stats.json)")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=_cmd_extract_surface)

    p = sub.add_parser("mask", help="apply seeded 3D patch masking to a grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--ratio", type=float, default=0.75)
    p.add_argument("--patch", type=int, default=4)
    p.add_argument("--out", required=True)
    p.add_argument("--mask-out", required=True, help="mask JSON output path")
    common(p)
    p.set_defaults(func=_cmd_mask)

    p = sub.add_parser("render", help="render scene JSON to PPM images")
    p.add_argument("--scene", required=True)
    p.add_argument("--out", required=True, help="output prefix")
    common(p)
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("eval-detect", help="3D detection AP/recall")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--iou-thresholds", default="0.25,0.5")
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_eval_detect)

    p = sub.add_parser("eval-pose", help="category-level pose AP")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--pose-thresholds", default="5:5,5:10,10:10",
                   help="comma-separated deg:cm pairs")
    p.add_argument("--symmetric-classes", default="bottle,bowl,can")
    p.add_argument("--symmetry-axis", default="0,1,0")
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_eval_pose)

    p = sub.add_parser("eval-voxels", help="semantic voxel label metrics")
    p.add_argument("--pred", required=True, help='JSON with {"labels_file", "n_classes"}')
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_eval_voxels)

    p = sub.add_parser("eval-nav", help="navigation metrics for one episode")
    p.add_argument("--trajectory", required=True)
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_eval_nav)

    p = sub.add_parser("bench-octree", help="octree vs dense-grid sampling benchmark")
    p.add_argument("--shape", default="sphere",
                   help=f"preset ({', '.join(SDF_PRESETS)}) or shape JSON path")
    p.add_argument("--band", type=float, default=0.03)
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_bench_octree)

    p = sub.add_parser("semmap", help="top-down semantic map from an RGB-D frame")
    p.add_argument("--depth", required=True, help=".npy depth image")
    p.add_argument("--semantics", required=True, help=".npy integer class image")
    p.add_argument("--intrinsics", required=True, help="intrinsics JSON")
    p.add_argument("--pose", required=True, help="pose JSON")
    p.add_argument("--half-extent", type=int, default=40)
    p.add_argument("--cell-size", type=float, default=0.1)
    p.add_argument("--height-min", type=float, default=0.1)
    p.add_argument("--height-max", type=float, default=1.8)
    p.add_argument("--classes", type=int, default=1)
    p.add_argument("--out", required=True)
    common(p, seed=False)
    p.set_defaults(func=_cmd_semmap)

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except SystemExit as e:  # --help
        return int(e.code or 0)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        args.func(args)
    except RadiantError as e:
        _emit_error("domain", e)
        return 3
    except ValueError as e:
        _emit_error("domain", e)
        return 3
    except OSError as e:
        _emit_error("io", e)
        return 2
    return 0


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
