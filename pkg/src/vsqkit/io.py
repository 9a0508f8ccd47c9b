"""On-disk dataset model and file codecs.

Dataset layout, rooted at a manifest.json:

    manifest.json
    <video_id>/gt/000000.png      16-bit single-channel instance ids, 0 = unlabeled
    <video_id>/depth/000000.png   16-bit depth, value * depth_scale = meters, 0 = no reading
    <video_id>/pose/000000.json   intrinsics + extrinsics + convention tag
    <video_id>/pred.json          RLE prediction records, overlaps allowed

Ground truth is stored as id maps (non-overlapping by construction) while
predictions are RLE records that may overlap; the asymmetry is the point
of the metric. Pose files state their convention explicitly:
"world_to_camera" extrinsics map world points into the camera frame
(+z forward, pixel origin top-left); "camera_to_world" files hold the
camera pose in world coordinates and are inverted on load.

Quaternions in waypoint, trajectory, and embodiment files are stored as
[w, x, y, z]. The world frame is +z up with the floor at z = 0. Every
codec is a lossless round trip at its stated precision.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .camgeo import CameraModel, check_rotation
from .errors import FormatError, ValidationError
from .mask import FrameSegmentation, RleMask, frame_from_id_map, rle_from_runs
from .trajectory import EmbodimentConfig, Waypose
from .vsq import VsqReport

WORLD_TO_CAMERA = "world_to_camera"
CAMERA_TO_WORLD = "camera_to_world"
POSE_CONVENTIONS = (WORLD_TO_CAMERA, CAMERA_TO_WORLD)
DEFAULT_DEPTH_SCALE = 0.001  # meters per stored unit (millimeters)

FRAME_NAME = "{:06d}"


# ---------------------------------------------------------------------------
# frame images


def _read_u16_image(path: Path) -> np.ndarray:
    img = Image.open(path)
    if img.mode not in ("I;16", "I;16B", "I;16L", "I"):
        raise FormatError(f"{path}: expected a 16-bit single-channel image, got mode {img.mode}")
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise FormatError(f"{path}: expected a single-channel image")
    if arr.min() < 0 or arr.max() > 0xFFFF:
        raise FormatError(f"{path}: pixel values exceed 16-bit range")
    return arr.astype(np.uint16)


def load_gt_frame(path: str | Path) -> FrameSegmentation:
    """Read an instance-id map; one mask per nonzero id."""
    return frame_from_id_map(_read_u16_image(Path(path)), background=0)


def save_gt_frame(frame: FrameSegmentation, path: str | Path) -> None:
    """Write a segmentation as an id map. Masks must not overlap."""
    grid = np.zeros((frame.height, frame.width), dtype=np.uint16)
    painted = 0
    for i, m in frame.masks.items():
        if not 1 <= i <= 0xFFFF:
            raise ValidationError(f"instance id {i} does not fit a 16-bit id map")
        idx = m.foreground_indices()
        grid[idx % frame.height, idx // frame.height] = i
        painted += m.area
    if int(np.count_nonzero(grid)) != painted:
        raise ValidationError("overlapping masks cannot be written as an id map")
    Image.fromarray(grid).save(path)


def load_depth(path: str | Path, scale: float = DEFAULT_DEPTH_SCALE) -> np.ndarray:
    """Read a depth image into meters; stored 0 stays the no-reading 0.0."""
    if scale <= 0:
        raise ValidationError("depth scale must be positive")
    return _read_u16_image(Path(path)).astype(np.float64) * scale


def save_depth(depth: np.ndarray, path: str | Path, scale: float = DEFAULT_DEPTH_SCALE) -> None:
    """Quantize depth in meters to 16-bit units; 0.0 means no reading.

    Valid readings never quantize to the sentinel: values that would
    round to 0 are clamped to one unit.
    """
    if scale <= 0:
        raise ValidationError("depth scale must be positive")
    d = np.asarray(depth, dtype=np.float64)
    if not np.isfinite(d).all() or (d < 0).any():
        raise ValidationError("depth values must be finite and non-negative")
    units = np.floor(d / scale + 0.5)
    if units.max() > 0xFFFF:
        raise ValidationError(
            f"depth exceeds the 16-bit range at scale {scale} ({units.max() * scale:.3f} m)"
        )
    units = np.where((d > 0) & (units == 0), 1, units)
    Image.fromarray(units.astype(np.uint16)).save(path)


# ---------------------------------------------------------------------------
# camera poses


def load_pose(path: str | Path) -> CameraModel:
    """Read intrinsics and extrinsics; validates rigidity on load."""
    path = Path(path)
    doc = _read_json(path)
    try:
        k = np.asarray(doc["intrinsics"], dtype=np.float64)
        ext = np.asarray(doc["extrinsics"], dtype=np.float64)
        convention = doc["convention"]
        width, height = (int(x) for x in doc["image_size"])
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed pose file ({e})") from e
    if convention not in POSE_CONVENTIONS:
        raise FormatError(f"{path}: unknown pose convention {convention!r}")
    if ext.shape != (4, 4) or np.abs(ext[3] - np.array([0, 0, 0, 1])).max() > 0:
        raise FormatError(f"{path}: extrinsics must be a homogeneous 4x4 matrix")
    r = ext[:3, :3]
    t = ext[:3, 3]
    try:
        check_rotation(r)
        if convention == CAMERA_TO_WORLD:
            r, t = r.T, -r.T @ t
        return CameraModel(k, r, t, width, height)
    except ValueError as e:
        raise ValidationError(f"{path}: {e}") from e


def save_pose(cam: CameraModel, path: str | Path, convention: str = WORLD_TO_CAMERA) -> None:
    if convention not in POSE_CONVENTIONS:
        raise ValidationError(f"unknown pose convention {convention!r}")
    r, t = cam.rotation, cam.translation
    if convention == CAMERA_TO_WORLD:
        r, t = r.T, -r.T @ t
    ext = np.eye(4)
    ext[:3, :3] = r
    ext[:3, 3] = t
    doc = {
        "image_size": [cam.width, cam.height],
        "intrinsics": cam.intrinsics.tolist(),
        "extrinsics": ext.tolist(),
        "convention": convention,
    }
    _write_json(doc, path)


# ---------------------------------------------------------------------------
# predictions


def load_predictions(path: str | Path, frame_count: int | None = None) -> list[FrameSegmentation]:
    """Read RLE prediction records into per-frame segmentations.

    Overlapping masks are preserved verbatim. Frames without records are
    empty segmentations; `frame_count` fixes the output length (defaults
    to one past the last recorded frame).
    """
    path = Path(path)
    doc = _read_json(path)
    try:
        width, height = (int(x) for x in doc["image_size"])
        records = doc["records"]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed prediction file ({e})") from e
    n = frame_count if frame_count is not None else 0
    frames: list[FrameSegmentation] = []
    parsed: list[tuple[int, int, RleMask]] = []
    for i, rec in enumerate(records):
        try:
            frame = int(rec["frame"])
            track_id = int(rec["track_id"])
            rw, rh = (int(x) for x in rec["size"])
            if (rw, rh) != (width, height):
                raise ValueError(f"record size {rw}x{rh} does not match {width}x{height}")
            if frame < 0:
                raise ValueError("negative frame index")
            if frame_count is not None and frame >= frame_count:
                raise ValueError(f"frame {frame} outside the declared {frame_count} frames")
            mask = rle_from_runs(width, height, rec["runs"])
        except (KeyError, TypeError, ValueError) as e:
            raise FormatError(f"{path}: record {i}: {e}") from e
        parsed.append((frame, track_id, mask))
        n = max(n, frame + 1)
    for _ in range(n):
        frames.append(FrameSegmentation(width, height, {}))
    for i, (frame, track_id, mask) in enumerate(parsed):
        try:
            frames[frame].add(track_id, mask)
        except ValueError as e:
            raise FormatError(f"{path}: record {i}: {e}") from e
    return frames


def save_predictions(frames: list[FrameSegmentation], path: str | Path) -> None:
    if not frames:
        raise ValidationError("cannot save an empty prediction sequence")
    width, height = frames[0].width, frames[0].height
    records = []
    for t, f in enumerate(frames):
        if f.width != width or f.height != height:
            raise ValidationError("prediction frames have inconsistent dimensions")
        for i in sorted(f.masks):
            records.append(
                {
                    "frame": t,
                    "track_id": i,
                    "size": [width, height],
                    "runs": [int(r) for r in f.masks[i].runs],
                }
            )
    _write_json({"image_size": [width, height], "records": records}, path)


# ---------------------------------------------------------------------------
# manifest


@dataclass
class VideoEntry:
    video_id: str
    frames: int
    gt_dir: str | None = None
    depth_dir: str | None = None
    pose_dir: str | None = None
    predictions: str | None = None


@dataclass
class DatasetManifest:
    root: Path
    image_size: tuple[int, int]
    depth_scale: float
    pose_convention: str
    videos: list[VideoEntry] = field(default_factory=list)

    def video(self, video_id: str) -> VideoEntry:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise ValidationError(f"no video {video_id!r} in manifest")


def _frame_paths(root: Path, sub: str, count: int, suffix: str) -> list[Path]:
    return [root / sub / (FRAME_NAME.format(i) + suffix) for i in range(count)]


def load_manifest(path: str | Path) -> DatasetManifest:
    """Read and validate a manifest; every referenced file must exist."""
    path = Path(path)
    doc = _read_json(path)
    root = path.parent
    try:
        width, height = (int(x) for x in doc["image_size"])
        depth_scale = float(doc.get("depth_scale", DEFAULT_DEPTH_SCALE))
        convention = doc.get("pose_convention", WORLD_TO_CAMERA)
        videos = [
            VideoEntry(
                video_id=str(v["id"]),
                frames=int(v["frames"]),
                gt_dir=v.get("gt_dir"),
                depth_dir=v.get("depth_dir"),
                pose_dir=v.get("pose_dir"),
                predictions=v.get("predictions"),
            )
            for v in doc["videos"]
        ]
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: malformed manifest ({e})") from e
    if convention not in POSE_CONVENTIONS:
        raise FormatError(f"{path}: unknown pose convention {convention!r}")
    manifest = DatasetManifest(root, (width, height), depth_scale, convention, videos)
    _validate_manifest(manifest)
    return manifest


def _validate_manifest(manifest: DatasetManifest) -> None:
    seen = set()
    for v in manifest.videos:
        if v.video_id in seen:
            raise ValidationError(f"duplicate video id {v.video_id!r}")
        seen.add(v.video_id)
        if v.frames < 1:
            raise ValidationError(f"video {v.video_id}: frame count must be positive")
        for sub, suffix in ((v.gt_dir, ".png"), (v.depth_dir, ".png"), (v.pose_dir, ".json")):
            if sub is None:
                continue
            directory = manifest.root / sub
            if not directory.is_dir():
                raise ValidationError(f"video {v.video_id}: missing directory {directory}")
            for p in _frame_paths(manifest.root, sub, v.frames, suffix):
                if not p.is_file():
                    raise ValidationError(f"video {v.video_id}: missing frame file {p}")
            present = len(list(directory.glob(f"*{suffix}")))
            if present != v.frames:
                raise ValidationError(
                    f"video {v.video_id}: {directory} holds {present} frames, manifest says {v.frames}"
                )
        if v.predictions is not None and not (manifest.root / v.predictions).is_file():
            raise ValidationError(
                f"video {v.video_id}: missing prediction file {manifest.root / v.predictions}"
            )


def save_manifest(manifest: DatasetManifest, path: str | Path | None = None) -> None:
    doc = {
        "image_size": list(manifest.image_size),
        "depth_scale": manifest.depth_scale,
        "pose_convention": manifest.pose_convention,
        "videos": [
            {
                "id": v.video_id,
                "frames": v.frames,
                **({"gt_dir": v.gt_dir} if v.gt_dir else {}),
                **({"depth_dir": v.depth_dir} if v.depth_dir else {}),
                **({"pose_dir": v.pose_dir} if v.pose_dir else {}),
                **({"predictions": v.predictions} if v.predictions else {}),
            }
            for v in manifest.videos
        ],
    }
    _write_json(doc, path if path is not None else manifest.root / "manifest.json")


def load_video_gt(manifest: DatasetManifest, entry: VideoEntry) -> list[FrameSegmentation]:
    if entry.gt_dir is None:
        raise ValidationError(f"video {entry.video_id} lists no ground-truth directory")
    frames = []
    for p in _frame_paths(manifest.root, entry.gt_dir, entry.frames, ".png"):
        f = load_gt_frame(p)
        if (f.width, f.height) != manifest.image_size:
            raise ValidationError(f"{p}: image size does not match the manifest")
        frames.append(f)
    return frames


def load_video_predictions(
    manifest: DatasetManifest, entry: VideoEntry, override_dir: str | Path | None = None
) -> list[FrameSegmentation]:
    if override_dir is not None:
        path = Path(override_dir) / f"{entry.video_id}.json"
    else:
        if entry.predictions is None:
            raise ValidationError(f"video {entry.video_id} lists no prediction file")
        path = manifest.root / entry.predictions
    frames = load_predictions(path, frame_count=entry.frames)
    if frames and (frames[0].width, frames[0].height) != manifest.image_size:
        raise ValidationError(f"{path}: image size does not match the manifest")
    return frames


def load_video_depth(manifest: DatasetManifest, entry: VideoEntry) -> list[np.ndarray]:
    if entry.depth_dir is None:
        raise ValidationError(f"video {entry.video_id} lists no depth directory")
    return [
        load_depth(p, manifest.depth_scale)
        for p in _frame_paths(manifest.root, entry.depth_dir, entry.frames, ".png")
    ]


def load_video_poses(manifest: DatasetManifest, entry: VideoEntry) -> list[CameraModel]:
    if entry.pose_dir is None:
        raise ValidationError(f"video {entry.video_id} lists no pose directory")
    cams = []
    for p in _frame_paths(manifest.root, entry.pose_dir, entry.frames, ".json"):
        cam = load_pose(p)
        if (cam.width, cam.height) != manifest.image_size:
            raise ValidationError(f"{p}: image size does not match the manifest")
        cams.append(cam)
    return cams


def write_video(
    root: str | Path,
    video_id: str,
    rendered: list[tuple[FrameSegmentation, np.ndarray, CameraModel]],
    predictions: list[FrameSegmentation],
    depth_scale: float = DEFAULT_DEPTH_SCALE,
) -> DatasetManifest:
    """Write one video (gt, depth, poses, predictions) into a dataset dir.

    Appends to an existing manifest when present, so datasets can be
    assembled video by video.
    """
    root = Path(root)
    if not rendered:
        raise ValidationError("cannot write an empty video")
    width, height = rendered[0][0].width, rendered[0][0].height
    manifest_path = root / "manifest.json"
    if manifest_path.exists():
        manifest = load_manifest(manifest_path)
        if manifest.image_size != (width, height):
            raise ValidationError("video image size does not match the existing dataset")
        if manifest.depth_scale != depth_scale:
            raise ValidationError("depth scale does not match the existing dataset")
        if any(v.video_id == video_id for v in manifest.videos):
            raise ValidationError(f"dataset already contains video {video_id!r}")
    else:
        manifest = DatasetManifest(root, (width, height), depth_scale, WORLD_TO_CAMERA, [])
    for sub in ("gt", "depth", "pose"):
        (root / video_id / sub).mkdir(parents=True, exist_ok=True)
    for t, (gt, depth, cam) in enumerate(rendered):
        name = FRAME_NAME.format(t)
        save_gt_frame(gt, root / video_id / "gt" / f"{name}.png")
        save_depth(depth, root / video_id / "depth" / f"{name}.png", depth_scale)
        save_pose(cam, root / video_id / "pose" / f"{name}.json")
    save_predictions(predictions, root / video_id / "pred.json")
    manifest.videos.append(
        VideoEntry(
            video_id=video_id,
            frames=len(rendered),
            gt_dir=f"{video_id}/gt",
            depth_dir=f"{video_id}/depth",
            pose_dir=f"{video_id}/pose",
            predictions=f"{video_id}/pred.json",
        )
    )
    save_manifest(manifest)
    return manifest


# ---------------------------------------------------------------------------
# wayposes, embodiment, scene specs


def _waypose_from_doc(doc: dict, where: str) -> Waypose:
    try:
        return Waypose(np.asarray(doc["position"], dtype=np.float64),
                       np.asarray(doc["rotation"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{where}: bad waypose ({e})") from e


def load_waypoints(path: str | Path) -> list[Waypose]:
    path = Path(path)
    doc = _read_json(path)
    if "waypoints" not in doc or not isinstance(doc["waypoints"], list):
        raise FormatError(f"{path}: expected a 'waypoints' list")
    return [_waypose_from_doc(w, f"{path}: waypoint {i}") for i, w in enumerate(doc["waypoints"])]


def save_trajectory(poses: list[Waypose], path: str | Path) -> None:
    doc = {
        "wayposes": [
            {"position": p.position.tolist(), "rotation": p.rotation.tolist()} for p in poses
        ]
    }
    _write_json(doc, path)


def load_trajectory(path: str | Path) -> list[Waypose]:
    path = Path(path)
    doc = _read_json(path)
    key = "wayposes" if "wayposes" in doc else "waypoints"
    if key not in doc or not isinstance(doc[key], list):
        raise FormatError(f"{path}: expected a 'wayposes' list")
    return [_waypose_from_doc(w, f"{path}: waypose {i}") for i, w in enumerate(doc[key])]


def load_embodiment_config(path: str | Path) -> EmbodimentConfig:
    """Schema: {sensor_height_m, sensor_offset: {rotation, translation},
    illumination: {type, power_w}}; rotation is [w, x, y, z]."""
    path = Path(path)
    doc = _read_json(path)
    try:
        offset = doc.get("sensor_offset", {})
        illum = doc.get("illumination", {})
        return EmbodimentConfig(
            sensor_height=float(doc["sensor_height_m"]),
            offset_rotation=np.asarray(offset.get("rotation", [1, 0, 0, 0]), dtype=np.float64),
            offset_translation=np.asarray(offset.get("translation", [0, 0, 0]), dtype=np.float64),
            illumination_type=str(illum.get("type", "ambient")),
            illumination_power_w=(
                float(illum["power_w"]) if illum.get("power_w") is not None else None
            ),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: bad embodiment config ({e})") from e


def load_scene_spec(path: str | Path):
    """Scene spec schema: image_size, intrinsics {fx, fy, cx, cy},
    boxes [{id, center, extents}], trajectory [wayposes], seed, depth_scale."""
    from .camgeo import intrinsics_matrix
    from .synth import BoxSpec, SceneSpec

    path = Path(path)
    doc = _read_json(path)
    try:
        width, height = (int(x) for x in doc["image_size"])
        ir = doc["intrinsics"]
        k = intrinsics_matrix(
            float(ir["fx"]), float(ir["fy"]), float(ir["cx"]), float(ir["cy"])
        )
        boxes = [
            BoxSpec(int(b["id"]), np.asarray(b["center"], dtype=np.float64),
                    np.asarray(b["extents"], dtype=np.float64))
            for b in doc["boxes"]
        ]
        trajectory = [
            _waypose_from_doc(w, f"{path}: trajectory pose {i}")
            for i, w in enumerate(doc["trajectory"])
        ]
        return SceneSpec(
            width=width,
            height=height,
            intrinsics=k,
            boxes=boxes,
            trajectory=trajectory,
            seed=int(doc.get("seed", 0)),
            depth_scale=float(doc.get("depth_scale", DEFAULT_DEPTH_SCALE)),
        )
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise FormatError(f"{path}: bad scene spec ({e})") from e


# ---------------------------------------------------------------------------
# reports


def report_document(report: VsqReport, config_echo: dict) -> dict:
    """Report schema; score values fixed to 2 decimals."""

    def r2(x: float | None) -> float | None:
        return None if x is None else round(x, 2)

    return {
        "config": config_echo,
        "counts": {str(k): dict(report.counts[k]) for k in report.k_set},
        "per_k": {str(k): r2(report.per_k[k]) for k in report.k_set},
        "vsq": r2(report.vsq),
    }


def write_report(report: VsqReport, config_echo: dict, path: str | Path) -> None:
    _write_json(report_document(report, config_echo), path)


# ---------------------------------------------------------------------------
# json plumbing


def _read_json(path: Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except json.JSONDecodeError as e:
        raise FormatError(f"{path}: invalid JSON ({e})") from e
    if not isinstance(doc, dict):
        raise FormatError(f"{path}: expected a JSON object")
    return doc


def _write_json(doc: dict, path: str | Path) -> None:
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
