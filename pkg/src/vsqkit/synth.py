"""Deterministic synthetic RGB-D scenes of axis-aligned boxes.

Each frame is rendered by exact per-pixel ray-box intersection along a
waypose trajectory, giving trustworthy ground-truth masks and depth
without a rasterizer. Depth images hold camera-frame z in meters with 0
where no surface is hit. Rendering is pure float arithmetic in a fixed
order, so output is bit-stable across runs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camgeo import CameraModel, camera_from_pose
from .mask import FrameSegmentation, frame_from_id_map
from .trajectory import Waypose, quat_to_matrix


@dataclass
class BoxSpec:
    """Axis-aligned box: world-frame center and full side lengths."""

    instance_id: int
    center: np.ndarray
    extents: np.ndarray

    def __post_init__(self) -> None:
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        self.extents = np.asarray(self.extents, dtype=np.float64).reshape(3)
        if (self.extents <= 0).any():
            raise ValueError("box extents must be positive")

    @property
    def low(self) -> np.ndarray:
        return self.center - self.extents / 2.0

    @property
    def high(self) -> np.ndarray:
        return self.center + self.extents / 2.0


@dataclass
class SceneSpec:
    """Scene description: boxes, camera intrinsics, and a trajectory."""

    width: int
    height: int
    intrinsics: np.ndarray
    boxes: list[BoxSpec]
    trajectory: list[Waypose]
    seed: int = 0
    depth_scale: float = 0.001

    def __post_init__(self) -> None:
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64)
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        if not self.trajectory:
            raise ValueError("the trajectory must contain at least one pose")
        ids = [b.instance_id for b in self.boxes]
        if len(set(ids)) != len(ids):
            raise ValueError("box instance ids must be unique")
        if self.depth_scale <= 0:
            raise ValueError("depth scale must be positive")

    @property
    def n_frames(self) -> int:
        return len(self.trajectory)


def camera_at(spec: SceneSpec, pose_index: int) -> CameraModel:
    wp = spec.trajectory[pose_index]
    return camera_from_pose(
        spec.intrinsics, quat_to_matrix(wp.rotation), wp.position, spec.width, spec.height
    )


def _box_pixel_region(
    box: BoxSpec, cam: CameraModel, width: int, height: int
) -> tuple[int, int, int, int] | None:
    """Conservative pixel bounding box of the projected box corners.

    Falls back to the full frame when any corner lies at or behind the
    camera plane. Returns None when the box cannot appear on screen.
    """
    lo, hi = box.low, box.high
    corners = np.array(
        [[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])]
    )
    q = corners @ cam.rotation.T + cam.translation
    if (q[:, 2] <= 1e-9).any():
        if (q[:, 2] <= 1e-9).all():
            return None
        return 0, width - 1, 0, height - 1
    us = cam.fx * q[:, 0] / q[:, 2] + cam.cx
    vs = cam.fy * q[:, 1] / q[:, 2] + cam.cy
    u0 = max(int(np.floor(us.min())) - 1, 0)
    u1 = min(int(np.ceil(us.max())) + 1, width - 1)
    v0 = max(int(np.floor(vs.min())) - 1, 0)
    v1 = min(int(np.ceil(vs.max())) + 1, height - 1)
    if u0 > u1 or v0 > v1:
        return None
    return u0, u1, v0, v1


def render_frame(
    spec: SceneSpec, pose_index: int
) -> tuple[FrameSegmentation, np.ndarray, CameraModel]:
    """Render one frame: exact masks, z-depth image, and the camera.

    The nearest box wins each pixel; ties at exactly equal depth go to
    the earlier box in the scene list.
    """
    if not 0 <= pose_index < spec.n_frames:
        raise IndexError(f"pose index {pose_index} out of range")
    cam = camera_at(spec, pose_index)
    w, h = spec.width, spec.height
    origin = spec.trajectory[pose_index].position
    rot_c2w = cam.rotation.T

    zbuf = np.full((h, w), np.inf)
    idbuf = np.full((h, w), -1, dtype=np.int64)

    for box in spec.boxes:
        region = _box_pixel_region(box, cam, w, h)
        if region is None:
            continue
        u0, u1, v0, v1 = region
        xs = (np.arange(u0, u1 + 1) - cam.cx) / cam.fx
        ys = (np.arange(v0, v1 + 1) - cam.cy) / cam.fy
        # world-frame ray directions with unit camera-frame z, so the ray
        # parameter equals camera-frame depth
        dirs = (
            rot_c2w[:, 0][None, None, :] * xs[None, :, None]
            + rot_c2w[:, 1][None, None, :] * ys[:, None, None]
            + rot_c2w[:, 2][None, None, :]
        )
        tmin = np.full(dirs.shape[:2], -np.inf)
        tmax = np.full(dirs.shape[:2], np.inf)
        lo, hi = box.low, box.high
        for axis in range(3):
            d = dirs[..., axis]
            with np.errstate(divide="ignore", invalid="ignore"):
                t1 = (lo[axis] - origin[axis]) / d
                t2 = (hi[axis] - origin[axis]) / d
            near = np.minimum(t1, t2)
            far = np.maximum(t1, t2)
            parallel = d == 0.0
            if parallel.any():
                inside = lo[axis] <= origin[axis] <= hi[axis]
                near = np.where(parallel, -np.inf if inside else np.inf, near)
                far = np.where(parallel, np.inf if inside else -np.inf, far)
            tmin = np.maximum(tmin, near)
            tmax = np.minimum(tmax, far)
        t = np.where(tmin > 1e-9, tmin, tmax)
        valid = (tmax >= tmin) & (t > 1e-9) & np.isfinite(t)
        zb = zbuf[v0 : v1 + 1, u0 : u1 + 1]
        ib = idbuf[v0 : v1 + 1, u0 : u1 + 1]
        closer = valid & (t < zb)
        zb[closer] = t[closer]
        ib[closer] = box.instance_id

    depth = np.where(idbuf >= 0, zbuf, 0.0)
    segmentation = frame_from_id_map(idbuf, background=-1)
    return segmentation, depth, cam


def render_video(
    spec: SceneSpec,
) -> list[tuple[FrameSegmentation, np.ndarray, CameraModel]]:
    return [render_frame(spec, i) for i in range(spec.n_frames)]


PERTURB_MODES = ("flicker", "split", "random-ids")


def perturb_segmentation(
    frames: list[FrameSegmentation], mode: str, seed: int = 0
) -> list[FrameSegmentation]:
    """Deterministic degradations that exercise the metric.

    flicker     drop every instance's mask on odd frame indices
    split       hand each track over to a fresh id from mid-video on
    random-ids  shuffle the ids within each frame (seeded)
    """
    if mode not in PERTURB_MODES:
        raise ValueError(f"unknown perturbation mode: {mode!r}")
    if mode == "flicker":
        out = []
        for t, f in enumerate(frames):
            masks = dict(f.masks) if t % 2 == 0 else {}
            out.append(FrameSegmentation(f.width, f.height, masks))
        return out
    if mode == "split":
        mid = len(frames) // 2
        all_ids = {i for f in frames for i in f.masks}
        offset = (max(all_ids) + 1) if all_ids else 0
        out = []
        for t, f in enumerate(frames):
            if t < mid:
                masks = dict(f.masks)
            else:
                masks = {i + offset: m for i, m in f.masks.items()}
            out.append(FrameSegmentation(f.width, f.height, masks))
        return out
    rng = np.random.default_rng(seed)
    out = []
    for f in frames:
        ids = sorted(f.masks)
        perm = rng.permutation(len(ids))
        remap = {ids[i]: ids[int(perm[i])] for i in range(len(ids))}
        out.append(
            FrameSegmentation(f.width, f.height, {remap[i]: m for i, m in f.masks.items()})
        )
    return out
