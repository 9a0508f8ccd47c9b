"""Temporal association by 3D self-prompting.

The tracker holds one 3D world-frame point per active track, the estimated
object centroid. Each frame those prompts are projected into the image;
every input segment containing a visible prompt's pixel is claimed by it,
claimed segments are unioned into a single output mask per prompt, and the
emitted mask's centroid is unprojected through the depth image to refresh
the prompt. Segments left unclaimed start new tracks. The per-frame
segmentation stage is an external input stream; input ids are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camgeo import CameraModel, project, prompt_visible, unproject
from .mask import FrameSegmentation, PixelPoint, RleMask, centroid_in_mask, mask_union


@dataclass
class TrackerConfig:
    visibility_tol: float = 0.05  # meters
    miss_budget: int = 10  # consecutive frames without a segment
    min_segment_area: int = 16  # pixels; smaller unclaimed segments are dropped

    def __post_init__(self) -> None:
        if self.visibility_tol <= 0 or self.miss_budget <= 0 or self.min_segment_area <= 0:
            raise ValueError("tracker config values must be positive")


@dataclass
class SelfPrompt:
    """One track's 3D anchor point plus bookkeeping counters."""

    track_id: int
    position: np.ndarray | None
    misses: int = 0
    age: int = 0


@dataclass
class TrackerState:
    prompts: list[SelfPrompt] = field(default_factory=list)
    next_track_id: int = 0


def _centroid_depth(mask: RleMask, depth: np.ndarray, centroid: PixelPoint) -> float | None:
    """Depth to use at the mask centroid.

    Falls back to the depth of the nearest foreground pixel with a valid
    reading when the centroid pixel has none; returns None when the whole
    mask lacks depth.
    """
    d = float(depth[centroid.v, centroid.u])
    if d > 0.0 and np.isfinite(d):
        return d
    idx = mask.foreground_indices()
    us = idx // mask.height
    vs = idx % mask.height
    ds = depth[vs, us]
    valid = np.isfinite(ds) & (ds > 0.0)
    if not valid.any():
        return None
    us, vs, ds = us[valid], vs[valid], ds[valid]
    d2 = (us - centroid.u) ** 2 + (vs - centroid.v) ** 2
    j = int(np.lexsort((us, vs, d2))[0])
    return float(ds[j])


def step(
    segments: FrameSegmentation,
    depth: np.ndarray,
    cam: CameraModel,
    state: TrackerState,
    cfg: TrackerConfig | None = None,
) -> tuple[FrameSegmentation, TrackerState]:
    """Advance the tracker by one frame.

    Returns the re-identified segmentation and the updated prompt set.
    Input, state, and config are not mutated.
    """
    cfg = cfg if cfg is not None else TrackerConfig()
    depth = np.asarray(depth, dtype=np.float64)
    if segments.width != cam.width or segments.height != cam.height:
        raise ValueError("segmentation dimensions do not match the camera")
    if depth.shape != (cam.height, cam.width):
        raise ValueError("depth image dimensions do not match the camera")

    # order segments by content, not input id, so output ids are invariant
    # to input-id permutation
    items = sorted(
        segments.masks.values(),
        key=lambda m: (m.first_foreground(), m.area, m.runs.tobytes()),
    )

    # 1. project prompts; invisible prompts cannot claim this frame
    visible_px: dict[int, PixelPoint] = {}
    for pi, prompt in enumerate(state.prompts):
        if prompt.position is None:
            continue
        if prompt_visible(prompt.position, cam, depth, cfg.visibility_tol):
            proj = project(prompt.position, cam)
            assert proj.pixel is not None
            visible_px[pi] = proj.pixel

    # 2. claims: a visible prompt claims every segment containing its pixel
    claimants: list[list[int]] = [[] for _ in items]
    for pi, px in visible_px.items():
        for si, m in enumerate(items):
            if m.contains(px.u, px.v):
                claimants[si].append(pi)

    # 3. contested segments go to the prompt whose pixel is nearest the
    #    segment centroid (ties to the older, lower track id)
    won: dict[int, list[int]] = {}
    for si, plist in enumerate(claimants):
        if not plist:
            continue
        if len(plist) == 1:
            winner = plist[0]
        else:
            c = centroid_in_mask(items[si])
            winner = min(
                plist,
                key=lambda pi: (
                    (visible_px[pi].u - c.u) ** 2 + (visible_px[pi].v - c.v) ** 2,
                    state.prompts[pi].track_id,
                ),
            )
        won.setdefault(winner, []).append(si)

    # 4. emit one unioned mask per claiming prompt
    emitted: list[tuple[int, RleMask, SelfPrompt | None]] = []
    new_prompts: list[SelfPrompt] = []
    for pi, prompt in enumerate(state.prompts):
        segs = won.get(pi)
        if segs:
            merged = mask_union([items[si] for si in segs])
            updated = SelfPrompt(prompt.track_id, prompt.position, 0, prompt.age + 1)
            emitted.append((prompt.track_id, merged, updated))
            new_prompts.append(updated)
        else:
            missed = SelfPrompt(
                prompt.track_id, prompt.position, prompt.misses + 1, prompt.age + 1
            )
            if missed.misses <= cfg.miss_budget:
                new_prompts.append(missed)

    # 5. unclaimed segments above the area floor spawn fresh tracks
    next_id = state.next_track_id
    for si, m in enumerate(items):
        if claimants[si] or m.area < cfg.min_segment_area:
            continue
        spawned = SelfPrompt(next_id, None, 0, 0)
        next_id += 1
        emitted.append((spawned.track_id, m, spawned))
        new_prompts.append(spawned)

    # 6. refresh prompt positions from the emitted masks
    out = FrameSegmentation(segments.width, segments.height, {})
    for track_id, m, prompt in emitted:
        out.add(track_id, m)
        if prompt is None or m.area == 0:
            continue
        c = centroid_in_mask(m)
        d = _centroid_depth(m, depth, c)
        if d is None:
            continue  # keep the previous position; new spawns stay unanchored
        prompt.position = unproject(c, d, cam)
        reproj = project(prompt.position, cam)
        if reproj.pixel is None or not m.contains(reproj.pixel.u, reproj.pixel.v):
            raise RuntimeError(
                f"track {track_id}: refreshed prompt does not reproject into its mask"
            )

    return out, TrackerState(new_prompts, next_id)


def run_video(
    frames: list[tuple[FrameSegmentation, np.ndarray, CameraModel]],
    cfg: TrackerConfig | None = None,
) -> list[FrameSegmentation]:
    """Fold the tracker over a video, starting from an empty prompt set."""
    if not frames:
        raise ValueError("need at least one frame")
    state = TrackerState()
    out = []
    for t, (segments, depth, cam) in enumerate(frames):
        try:
            seg, state = step(segments, depth, cam, state, cfg)
        except ValueError as e:
            raise ValueError(f"frame {t}: {e}") from e
        out.append(seg)
    return out
