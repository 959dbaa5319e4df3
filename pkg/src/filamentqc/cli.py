"""Command-line pipeline: render, segment, merge, profile, backproject, run.

Exit codes: 0 success, 2 config error, 3 input data error, 4 internal
invariant failure. ``run`` executes the five stages in sequence over one
output directory and adds ``timing.json``; because each stage is a pure
function of its inputs, ``run`` produces byte-identical artifacts to invoking
the stages individually.

Output directory layout::

    render.png  render.idx  render.dpt   color / index / depth rasters
    render_cloud.ply                     the exact cloud that was rendered
    manifest.json  tiles/*.png           sliding-window tiles
    masks/*.json                         per-tile mask interchange files
    instances.json                       merged global instances
    report.json  plots/*.png             thickness profiles
    labeled.ply  legend.json             3D labels
    timing.json                          stage timings (run only)
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

import numpy as np

import filamentqc.render as rnd

from . import backproject as bp
from . import baseline, camera, cloud as cl, config as cfgmod
from . import heightprofile as hp
from . import io_ply, masks as msk, synth, tiles as tl
from .errors import ConfigError, DataError, FilamentQCError, InternalError

_TILE_NAME = "tile_{y:05d}_{x:05d}"


def _out(cfg) -> Path:
    return Path(cfg.output_dir)


def _load_input_cloud(cfg):
    inp = cfg.input
    path = Path(inp.path)
    if not path.exists():
        raise DataError(f"input cloud does not exist: {path}")
    pcloud, labels = io_ply.load_point_cloud_with_labels(path, inp.format)
    if len(pcloud) == 0:
        raise DataError(f"input cloud is empty: {path}")
    if inp.voxel_m > 0:
        pcloud, _ = cl.voxel_subsample(pcloud, inp.voxel_m)
        labels = None  # indices change; labels no longer line up
    if inp.colorize == "signed_distance":
        plane = cl.fit_plane(pcloud, inp.plane_method,
                             ransac_iters=inp.ransac_iters,
                             ransac_tol_m=inp.ransac_tol_m,
                             seed=inp.ransac_seed)
        pcloud = cl.signed_distance_colorize(pcloud, plane)
    return pcloud, labels


def _build_camera(cfg, pcloud):
    cam = cfg.camera
    distance = camera.working_distance(cam.target_gsd_m, cam.pixel_size_mm,
                                       cam.focal_mm)
    aabb = cl.compute_aabb(pcloud)
    if cam.mode == "pp":
        pose = camera.place_pp(aabb, cam.side, distance)
    else:
        centroid = cl.compute_centroid(pcloud)
        pose = camera.place_ksp(cam.sensor_pos, centroid, cam.ksp_axis,
                                distance)
    if cam.width_px > 0:
        cx = cam.cx if cam.cx >= 0 else cam.width_px / 2.0
        cy = cam.cy if cam.cy >= 0 else cam.height_px / 2.0
        intr = camera.Intrinsics(cam.focal_mm, cam.pixel_size_mm,
                                 cam.width_px, cam.height_px, cx, cy)
    else:
        intr = camera.frame_intrinsics(pose, cam.focal_mm, cam.pixel_size_mm,
                                       aabb, cfg.tiling.tile_px)
    far = cam.far_m if cam.far_m > 0 else 4.0 * distance
    if far <= cam.near_m:
        raise ConfigError("[camera] far_m must exceed near_m")
    frustum = camera.build_frustum(pose, intr, cam.near_m, far)
    return pose, intr, frustum


def cmd_render(cfg) -> dict:
    """Render the cloud and cut tiles; returns stage timings in seconds."""
    out = _out(cfg)
    t0 = time.perf_counter()
    pcloud, labels = _load_input_cloud(cfg)
    t_load = time.perf_counter() - t0

    t0 = time.perf_counter()
    pose, intr, frustum = _build_camera(cfg, pcloud)
    selected = camera.clip(pcloud, frustum)
    splat = rnd.SplatConfig(cfg.render.splat_radius_px,
                            cfg.render.colormap_range_m,
                            cfg.render.hole_fill)
    buffer = rnd.render(pcloud, selected, pose, intr, splat,
                        cfg.camera.target_gsd_m)
    t_render = time.perf_counter() - t0

    t0 = time.perf_counter()
    grid = tl.TileGrid(intr.width_px, intr.height_px, cfg.tiling.tile_px,
                       cfg.tiling.overlap_px)
    cut = tl.tile(buffer.color, grid)
    t_tiling = time.perf_counter() - t0

    t0 = time.perf_counter()
    out.mkdir(parents=True, exist_ok=True)
    (out / "tiles").mkdir(exist_ok=True)
    rnd.write_png(buffer.color, out / "render.png")
    rnd.write_index_raster(buffer.index_map, out / "render.idx")
    rnd.write_depth_raster(buffer.depth, out / "render.dpt")
    io_ply.save_point_cloud(pcloud, out / "render_cloud.ply",
                            io_ply.PLY_BINARY_LE, labels=labels)
    names = []
    for (x0, y0), tile_img in cut:
        name = _TILE_NAME.format(x=x0, y=y0)
        rnd.write_png(tile_img, out / "tiles" / f"{name}.png")
        names.append(f"tiles/{name}.png")
    tl.write_manifest(out / "manifest.json", Path(cfg.input.path).stem, grid,
                      cfg.camera.target_gsd_m, names)
    t_export = time.perf_counter() - t0
    return {"load": t_load, "render": t_render, "tiling": t_tiling,
            "export": t_export}


def cmd_segment(cfg) -> dict:
    """Produce or validate per-tile mask interchange files."""
    out = _out(cfg)
    manifest = tl.read_manifest(out / "manifest.json")
    seg = cfg.segmentation
    t0 = time.perf_counter()
    mask_dir = out / "masks"
    mask_dir.mkdir(parents=True, exist_ok=True)
    for entry in manifest["tiles"]:
        stem = Path(entry["file"]).stem
        origin = (int(entry["origin"][0]), int(entry["origin"][1]))
        if seg.backend == "baseline":
            img = rnd.read_png(out / entry["file"])
            result = baseline.segment_baseline(
                img, image_id=stem, groove_k=seg.groove_k,
                min_area_px=seg.min_area_px, origin=origin)
            result = msk.filter_masks(result, seg.min_area_px, seg.min_conf)
        else:
            src = Path(seg.external_mask_dir) / f"{stem}.json"
            result = msk.import_masks(src)
            if (result.width, result.height) != (entry["width"], entry["height"]):
                raise DataError(
                    f"{src}: mask dims {(result.width, result.height)} do not "
                    f"match tile dims {(entry['width'], entry['height'])}")
            if result.frame != msk.FRAME_TILE or tuple(result.origin) != origin:
                raise DataError(
                    f"{src}: frame/origin do not match manifest entry {origin}")
            result = msk.filter_masks(result, seg.min_area_px, seg.min_conf)
        msk.export_masks(result, mask_dir / f"{stem}.json")
    return {"segmentation": time.perf_counter() - t0}


def cmd_merge(cfg) -> dict:
    """Reattach per-tile masks to the global frame and merge by IoU."""
    out = _out(cfg)
    manifest = tl.read_manifest(out / "manifest.json")
    width, height = int(manifest["width"]), int(manifest["height"])
    t0 = time.perf_counter()
    per_tile = []
    for entry in manifest["tiles"]:
        stem = Path(entry["file"]).stem
        path = out / "masks" / f"{stem}.json"
        if not path.exists():
            raise DataError(f"missing mask file for tile {stem}: {path}")
        per_tile.append((tuple(entry["origin"]), msk.import_masks(path)))
    global_masks = tl.reattach(per_tile, width, height)
    instances = tl.merge_instances(global_masks, cfg.tiling.iou_threshold,
                                   width, height)
    elapsed = time.perf_counter() - t0

    doc = {
        "image_id": manifest["image_id"],
        "width": width,
        "height": height,
        "gsd_m": manifest["gsd_m"],
        "instances": [
            {
                "id": g.id,
                "confidence": float(g.confidence),
                "member_tiles": [list(t) for t in g.member_tiles],
                "rle": [int(r) for r in g.mask.rle],
            }
            for g in instances
        ],
    }
    with (out / "instances.json").open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return {"merge": elapsed}


def _read_instances(out: Path):
    path = out / "instances.json"
    if not path.exists():
        raise DataError(f"instances file does not exist: {path}")
    doc = json.loads(path.read_text())
    width, height = int(doc["width"]), int(doc["height"])
    instances = []
    for entry in doc["instances"]:
        mask = msk.InstanceMask(
            int(entry["id"]), np.asarray(entry["rle"], dtype=np.int64),
            width, height, float(entry["confidence"]), msk.FRAME_GLOBAL)
        instances.append(tl.GlobalInstance(
            int(entry["id"]), mask, float(entry["confidence"]),
            tuple(tuple(t) for t in entry["member_tiles"])))
    return doc, instances


def _read_plan(path: Path) -> list[float]:
    if not path.exists():
        raise DataError(f"plan file does not exist: {path}")
    heights = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            heights.append(float(stripped))
        except ValueError:
            raise DataError(f"{path}:{lineno}: not a number: {stripped!r}")
    return heights


def cmd_profile(cfg) -> dict:
    """Thickness profiles per merged instance, plus optional plan deviations."""
    out = _out(cfg)
    doc, instances = _read_instances(out)
    gsd_m = float(doc["gsd_m"])
    plan = _read_plan(Path(cfg.profile.plan_file)) if cfg.profile.plan_file \
        else None

    t0 = time.perf_counter()
    profiles = []
    crops = {}
    for g in instances:
        bitmap = g.mask.to_bitmap()
        rows, cols = np.nonzero(bitmap)
        y0, y1 = int(rows.min()), int(rows.max()) + 1
        x0, x1 = int(cols.min()), int(cols.max()) + 1
        crop = bitmap[y0:y1, x0:x1]
        dmap = hp.distance_transform(crop, mask_id=g.id)
        prof = hp.column_profile(dmap, gsd_m, cfg.profile.mode,
                                 instance_id=g.id, col_offset=x0)
        prof = dataclasses.replace(
            prof, row_center=prof.row_center + y0,
            row_range=(prof.row_range[0] + y0, prof.row_range[1] + y0))
        profiles.append(prof)
        crops[g.id] = (x0, y0)
    comparison = hp.compare_to_plan(profiles, plan) if plan is not None else None
    elapsed = time.perf_counter() - t0

    deviations = {}
    if comparison is not None:
        deviations = {e.instance_id: e for e in comparison.entries}
    report = {
        "image_id": doc["image_id"],
        "gsd_m": gsd_m,
        "mode": cfg.profile.mode,
        "instances": [],
    }
    if comparison is not None:
        report["plan_ordering_warning"] = comparison.ordering_warning
    for prof in profiles:
        stats = prof.stats
        entry = {
            "id": prof.instance_id,
            "col_offset": prof.col_offset,
            "columns": int(prof.ridge_px.shape[0]),
            "valid_count": int(prof.valid.sum()),
            "mode": prof.mode,
            "thickness_mm": [round(float(v), 6) for v in prof.thickness_mm],
            "valid": [bool(v) for v in prof.valid],
            "stats": None if stats is None else {
                "mean_mm": round(stats.mean_mm, 6),
                "min_mm": round(stats.min_mm, 6),
                "max_mm": round(stats.max_mm, 6),
                "std_mm": round(stats.std_mm, 6),
            },
        }
        if prof.instance_id in deviations:
            dev = deviations[prof.instance_id]
            entry["plan"] = {
                "layer_index": dev.layer_index,
                "planned_mm": dev.planned_mm,
                "measured_mm": round(dev.measured_mm, 6),
                "deviation_mm": round(dev.deviation_mm, 6),
            }
        report["instances"].append(entry)
    with (out / "report.json").open("w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")

    if cfg.profile.plots and profiles:
        _write_plots(out, profiles)
    return {"profile": elapsed}


def _write_plots(out: Path, profiles) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir = out / "plots"
    plot_dir.mkdir(exist_ok=True)
    for prof in profiles:
        cols = np.arange(prof.ridge_px.shape[0]) + prof.col_offset
        thick = np.where(prof.valid, prof.thickness_mm, np.nan)
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(cols, thick, lw=1.0)
        ax.set_xlabel("image column [px]")
        ax.set_ylabel("thickness [mm]")
        ax.set_title(f"instance {prof.instance_id} ({prof.mode} mode)")
        fig.tight_layout()
        fig.savefig(plot_dir / f"instance_{prof.instance_id:03d}.png", dpi=100,
                    metadata={"Software": "filamentqc"})
        plt.close(fig)


def cmd_backproject(cfg) -> dict:
    """Label the rendered cloud from the merged instances and export PLY."""
    out = _out(cfg)
    cloud_path = out / "render_cloud.ply"
    if not cloud_path.exists():
        raise DataError(f"rendered cloud does not exist: {cloud_path}")
    pcloud = io_ply.load_point_cloud(cloud_path, io_ply.PLY_BINARY_LE)
    index_map = rnd.read_index_raster(out / "render.idx")
    doc, instances = _read_instances(out)

    t0 = time.perf_counter()
    labeled = bp.label_points(index_map, pcloud, instances,
                              provenance=str(doc["image_id"]))
    elapsed = time.perf_counter() - t0

    bp.export_labeled(labeled, out / "labeled.ply")
    legend = {
        "image_id": doc["image_id"],
        "instances": [
            {"id": g.id, "confidence": float(g.confidence),
             "member_tiles": [list(t) for t in g.member_tiles]}
            for g in instances
        ],
    }
    with (out / "legend.json").open("w") as fh:
        json.dump(legend, fh, indent=2)
        fh.write("\n")
    return {"backproject": elapsed}


def cmd_run(cfg) -> dict:
    """All stages in sequence plus a timing report."""
    timings: dict[str, float] = {}
    timings.update(cmd_render(cfg))
    timings.update(cmd_segment(cfg))
    timings.update(cmd_merge(cfg))
    timings.update(cmd_profile(cfg))
    timings.update(cmd_backproject(cfg))

    manifest = tl.read_manifest(_out(cfg) / "manifest.json")
    num_tiles = len(manifest["tiles"])
    pre_ms = (timings["render"] + timings["tiling"]) * 1000.0
    seg_ms = timings["segmentation"] * 1000.0
    post_ms = (timings["merge"] + timings["profile"]
               + timings["backproject"]) * 1000.0
    total_ms = pre_ms + seg_ms + post_ms
    doc = {
        "stages_s": {k: round(v, 6) for k, v in timings.items()},
        "num_tiles": num_tiles,
        "per_image_ms": {
            "pre_processing": round(pre_ms, 3),
            "segmentation": round(seg_ms, 3),
            "post_processing": round(post_ms, 3),
            "total": round(total_ms, 3),
            "fps": round(1000.0 / total_ms, 3) if total_ms > 0 else 0.0,
        },
    }
    with (_out(cfg) / "timing.json").open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
    return doc


def cmd_synth(args) -> None:
    path = synth.StraightPath(args.length_m) if args.path == "straight" \
        else synth.HelicalPath(args.radius_m, args.pitch_mm or
                               args.height_mm, args.turns or args.n_layers)
    spec = synth.SynthSpec(
        n_layers=args.n_layers,
        filament_height_mm=args.height_mm,
        filament_width_mm=args.width_mm,
        path=path,
        cross_section=args.cross_section,
        surface_noise_sigma_mm=args.noise_mm,
        point_spacing_mm=args.spacing_mm,
        groove_depth_mm=args.groove_mm,
    )
    result = synth.generate(spec, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    io_ply.save_point_cloud(result.cloud, out / "synth_cloud.ply",
                            args.format, labels=result.labels)
    with (out / "plan.txt").open("w") as fh:
        fh.write("# planned layer heights (mm), bottom to top\n")
        for height in result.layer_heights_mm:
            fh.write(f"{height}\n")
    print(f"wrote {len(result.cloud)} points over {spec.n_layers} layers "
          f"to {out / 'synth_cloud.ply'}")


def _add_config_flags(sub) -> None:
    sub.add_argument("--config", required=True, help="pipeline config file")
    sub.add_argument("--set", action="append", default=[], metavar="S.K=V",
                     help="override a config entry (section.key=value)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filamentqc",
        description="Filament quality control for 3D concrete printing")
    subs = parser.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("render", "render the cloud and cut tiles"),
        ("segment", "segment tiles (baseline) or validate external masks"),
        ("merge", "merge per-tile masks into global instances"),
        ("profile", "extract per-instance thickness profiles"),
        ("backproject", "label the 3D cloud from merged instances"),
        ("run", "all stages in sequence with a timing report"),
    ]:
        sub = subs.add_parser(name, help=doc)
        _add_config_flags(sub)

    sub = subs.add_parser("synth", help="generate a synthetic printed wall")
    sub.add_argument("--out", required=True)
    sub.add_argument("--n-layers", type=int, default=5)
    sub.add_argument("--height-mm", type=float, default=10.0)
    sub.add_argument("--width-mm", type=float, default=20.0)
    sub.add_argument("--path", choices=["straight", "helical"],
                     default="straight")
    sub.add_argument("--length-m", type=float, default=0.5)
    sub.add_argument("--radius-m", type=float, default=0.15)
    sub.add_argument("--pitch-mm", type=float, default=0.0,
                     help="helix rise per turn (default: filament height)")
    sub.add_argument("--turns", type=float, default=0.0,
                     help="helix turns (default: n-layers)")
    sub.add_argument("--cross-section", choices=list(synth.CROSS_SECTIONS),
                     default="stadium")
    sub.add_argument("--noise-mm", type=float, default=0.3)
    sub.add_argument("--spacing-mm", type=float, default=1.0)
    sub.add_argument("--groove-mm", type=float, default=2.0)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--format", choices=[io_ply.PLY_BINARY_LE,
                                          io_ply.PLY_ASCII],
                     default=io_ply.PLY_BINARY_LE)
    return parser


_COMMANDS = {
    "render": cmd_render,
    "segment": cmd_segment,
    "merge": cmd_merge,
    "profile": cmd_profile,
    "backproject": cmd_backproject,
    "run": cmd_run,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            try:
                cmd_synth(args)
            except ValueError as err:
                raise ConfigError(str(err)) from err
        else:
            cfg = cfgmod.load_config(args.config, args.set)
            _COMMANDS[args.command](cfg)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except (DataError, ValueError) as err:
        print(f"input data error: {err}", file=sys.stderr)
        return 3
    except (InternalError, FilamentQCError, AssertionError) as err:
        print(f"internal error: {err}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())
