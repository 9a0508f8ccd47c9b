"""Command-line interface: evaluate, track, densify, synth.

Exit codes: 0 success, 1 validation failure, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import io as dio
from .errors import ValidationError
from .synth import PERTURB_MODES, perturb_segmentation, render_video
from .tracker import TrackerConfig, run_video
from .trajectory import apply_embodiment, densify_path
from .vsq import DEFAULT_STRIDE, EvalConfig, evaluate_dataset


def _parse_k_set(text: str) -> tuple[int, ...]:
    try:
        ks = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad window list {text!r}")
    if not ks:
        raise argparse.ArgumentTypeError("window list must not be empty")
    return ks


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vsqkit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="score predictions against ground truth")
    ev.add_argument("--manifest", required=True, type=Path)
    ev.add_argument("--pred-dir", type=Path, default=None,
                    help="read <video_id>.json prediction files here instead of the manifest paths")
    ev.add_argument("--k", type=_parse_k_set, default=None, metavar="K1,K2,...",
                    help="window lengths (default 1,5,10,15)")
    ev.add_argument("--stride", type=int, default=DEFAULT_STRIDE)
    ev.add_argument("--per-video", action="store_true",
                    help="macro-average per video instead of pooling all windows")
    ev.add_argument("--tp-threshold", type=float, default=0.0,
                    help="minimum tube IoU for a matched pair to count as TP")
    ev.add_argument("--frame-averaged-iou", action="store_true",
                    help="average per-frame IoU instead of the volumetric ratio")
    ev.add_argument("--skip-empty-windows", action="store_true",
                    help="treat windows with no tubes as skipped rather than perfect")
    ev.add_argument("--link-predictions", action="store_true",
                    help="re-link prediction ids by pairwise overlap before scoring")
    ev.add_argument("--jobs", type=int, default=1)
    ev.add_argument("--out", required=True, type=Path)

    tr = sub.add_parser("track", help="re-identify per-frame segments via 3D self-prompts")
    tr.add_argument("--manifest", required=True, type=Path)
    tr.add_argument("--visibility-tol", type=float, default=0.05)
    tr.add_argument("--miss-budget", type=int, default=10)
    tr.add_argument("--min-area", type=int, default=16)
    tr.add_argument("--out", required=True, type=Path, help="output prediction directory")

    de = sub.add_parser("densify", help="interpolate waypoints into a dense trajectory")
    de.add_argument("--waypoints", required=True, type=Path)
    de.add_argument("--embodiment", type=Path, default=None)
    de.add_argument("--out", required=True, type=Path)

    sy = sub.add_parser("synth", help="render a synthetic video into a dataset directory")
    sy.add_argument("--spec", required=True, type=Path)
    sy.add_argument("--out", required=True, type=Path)
    sy.add_argument("--video-id", default=None)
    sy.add_argument("--perturb", choices=PERTURB_MODES, default=None)
    sy.add_argument("--seed", type=int, default=0)

    return parser


def _cmd_evaluate(args: argparse.Namespace) -> int:
    manifest = dio.load_manifest(args.manifest)
    cfg = EvalConfig(
        k_set=args.k if args.k is not None else EvalConfig.k_set,
        stride=args.stride,
        tp_threshold=args.tp_threshold,
        frame_averaged_iou=args.frame_averaged_iou,
        per_video=args.per_video,
        skip_empty_windows=args.skip_empty_windows,
        link_predictions=args.link_predictions,
        jobs=args.jobs,
    )
    videos = []
    for entry in manifest.videos:
        gt = dio.load_video_gt(manifest, entry)
        pred = dio.load_video_predictions(manifest, entry, args.pred_dir)
        videos.append((gt, pred))
    try:
        report = evaluate_dataset(videos, cfg)
    except ValueError as e:
        raise ValidationError(str(e)) from e
    echo = {
        "k_set": list(cfg.k_set),
        "stride": cfg.stride,
        "tp_threshold": cfg.tp_threshold,
        "frame_averaged_iou": cfg.frame_averaged_iou,
        "per_video": cfg.per_video,
        "skip_empty_windows": cfg.skip_empty_windows,
        "link_predictions": cfg.link_predictions,
    }
    dio.write_report(report, echo, args.out)
    for k in report.k_set:
        value = report.per_k[k]
        shown = "skipped" if value is None else f"{value:.2f}"
        c = report.counts[k]
        print(f"VSQ^{k:<3d} {shown:>8s}   tp={c['tp']} fp={c['fp']} fn={c['fn']}")
    print(f"VSQ     {report.vsq:>8.2f}" if report.vsq is not None else "VSQ      skipped")
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    manifest = dio.load_manifest(args.manifest)
    cfg = TrackerConfig(
        visibility_tol=args.visibility_tol,
        miss_budget=args.miss_budget,
        min_segment_area=args.min_area,
    )
    args.out.mkdir(parents=True, exist_ok=True)
    for entry in manifest.videos:
        segments = dio.load_video_predictions(manifest, entry)
        depths = dio.load_video_depth(manifest, entry)
        cams = dio.load_video_poses(manifest, entry)
        try:
            tracked = run_video(list(zip(segments, depths, cams)), cfg)
        except ValueError as e:
            raise ValidationError(f"video {entry.video_id}: {e}") from e
        dio.save_predictions(tracked, args.out / f"{entry.video_id}.json")
        n_tracks = len({i for f in tracked for i in f.masks})
        print(f"{entry.video_id}: {len(tracked)} frames, {n_tracks} tracks")
    return 0


def _cmd_densify(args: argparse.Namespace) -> int:
    waypoints = dio.load_waypoints(args.waypoints)
    try:
        dense = densify_path(waypoints)
        if args.embodiment is not None:
            dense = apply_embodiment(dense, dio.load_embodiment_config(args.embodiment))
    except ValueError as e:
        raise ValidationError(str(e)) from e
    dio.save_trajectory(dense, args.out)
    print(f"{len(waypoints)} waypoints -> {len(dense)} wayposes")
    return 0


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = dio.load_scene_spec(args.spec)
    rendered = render_video(spec)
    gt_frames = [seg for seg, _, _ in rendered]
    if args.perturb is not None:
        predictions = perturb_segmentation(gt_frames, args.perturb, args.seed)
    else:
        predictions = gt_frames
    args.out.mkdir(parents=True, exist_ok=True)
    if args.video_id is None:
        existing = 0
        if (args.out / "manifest.json").exists():
            existing = len(dio.load_manifest(args.out / "manifest.json").videos)
        video_id = f"video{existing:03d}"
    else:
        video_id = args.video_id
    dio.write_video(args.out, video_id, rendered, predictions, spec.depth_scale)
    print(f"wrote {video_id}: {len(rendered)} frames, {len(spec.boxes)} boxes")
    return 0


_COMMANDS = {
    "evaluate": _cmd_evaluate,
    "track": _cmd_track,
    "densify": _cmd_densify,
    "synth": _cmd_synth,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
