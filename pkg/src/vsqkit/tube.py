"""Segment tubes over fixed-length frame windows.

A tube is one instance's track of per-frame masks across a window. Tube
overlap scores are volumetric: pixel counts are summed over all frames of
the window before dividing, so frames where the instance is unobserved
contribute nothing to either side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .assignment import solve_max_assignment
from .mask import FrameSegmentation, RleMask, empty_mask, f_measure, intersection_area


@dataclass(frozen=True)
class Window:
    """Half-open frame range [start, start + length)."""

    start: int
    length: int

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError("window start must be non-negative")
        if self.length < 1:
            raise ValueError("window length must be at least 1")

    @property
    def stop(self) -> int:
        return self.start + self.length


@dataclass
class SegmentTube:
    """Ordered per-frame masks of one instance over a window.

    Entries may be the empty mask for frames where the instance is
    unobserved, but at least one mask must be non-empty.
    """

    instance_id: int
    start_frame: int
    masks: list[RleMask]

    def __post_init__(self) -> None:
        if not self.masks:
            raise ValueError("a tube needs at least one frame")
        w, h = self.masks[0].width, self.masks[0].height
        for m in self.masks:
            if m.width != w or m.height != h:
                raise ValueError("all tube masks must share dimensions")
        if all(m.area == 0 for m in self.masks):
            raise ValueError("a tube must contain at least one non-empty mask")

    @property
    def length(self) -> int:
        return len(self.masks)

    @property
    def total_area(self) -> int:
        return sum(m.area for m in self.masks)


def _check_same_window(u: SegmentTube, v: SegmentTube) -> None:
    if u.start_frame != v.start_frame or u.length != v.length:
        raise ValueError("tubes cover different windows")
    if u.masks[0].width != v.masks[0].width or u.masks[0].height != v.masks[0].height:
        raise ValueError("tubes have mismatched mask dimensions")


def tube_intersection(u: SegmentTube, v: SegmentTube) -> int:
    """Foreground overlap summed over all frames of the window."""
    _check_same_window(u, v)
    return sum(intersection_area(a, b) for a, b in zip(u.masks, v.masks))


def tube_f_measure(u: SegmentTube, v: SegmentTube) -> float:
    """Volumetric F-measure: 2 * sum_t |u_t n v_t| / (sum_t |u_t| + sum_t |v_t|)."""
    _check_same_window(u, v)
    denom = u.total_area + v.total_area
    if denom == 0:
        return 0.0
    return 2.0 * tube_intersection(u, v) / denom


def tube_iou(u: SegmentTube, v: SegmentTube) -> float:
    """Volumetric IoU: sum_t |u_t n v_t| / sum_t |u_t u v_t|."""
    _check_same_window(u, v)
    inter = tube_intersection(u, v)
    union = u.total_area + v.total_area - inter
    if union == 0:
        return 0.0
    return inter / union


def frame_averaged_tube_iou(u: SegmentTube, v: SegmentTube) -> float:
    """Mean per-frame IoU over frames where the union is non-empty.

    Sensitivity-analysis variant of the volumetric score; frames where
    both masks are empty are skipped rather than counted as zero.
    """
    _check_same_window(u, v)
    vals = []
    for a, b in zip(u.masks, v.masks):
        union = a.area + b.area
        if union == 0:
            continue
        inter = intersection_area(a, b)
        vals.append(inter / (union - inter))
    if not vals:
        return 0.0
    return float(np.mean(vals))


def build_tubes_from_ids(
    frames: list[FrameSegmentation], window: Window
) -> list[SegmentTube]:
    """One tube per instance id observed in the window, ordered by id.

    Frames where an id is absent receive the empty mask. Ids observed
    only with empty masks produce no tube.
    """
    if window.stop > len(frames):
        raise ValueError("frames do not cover the window")
    sub = frames[window.start : window.stop]
    present: set[int] = set()
    for f in sub:
        for i, m in f.masks.items():
            if m.area > 0:
                present.add(i)
    tubes = []
    for i in sorted(present):
        masks = [f.mask_for(i) for f in sub]
        tubes.append(SegmentTube(i, window.start, masks))
    return tubes


def link_frame_predictions(
    frames: list[FrameSegmentation],
) -> list[FrameSegmentation]:
    """Assign track-consistent ids by pairwise matching of consecutive frames.

    Consecutive frames are matched on pairwise mask F-measure with the
    max-assignment solver; matched segments inherit the predecessor's
    track id, unmatched segments receive fresh ids. There is no gap
    bridging: a track broken by a fully missed frame is not re-linked.
    """
    if not frames:
        raise ValueError("need at least one frame")
    next_id = 0
    out: list[FrameSegmentation] = []
    prev: list[tuple[int, RleMask]] = []
    for f in frames:
        items = [(i, f.masks[i]) for i in sorted(f.masks)]
        inherited: dict[int, int] = {}
        if prev and items:
            scores = np.zeros((len(prev), len(items)))
            for r, (_, pm) in enumerate(prev):
                for c, (_, cm) in enumerate(items):
                    scores[r, c] = f_measure(pm, cm)
            for r, c in solve_max_assignment(scores).pairs:
                inherited[c] = prev[r][0]
        cur: list[tuple[int, RleMask]] = []
        for c, (_, m) in enumerate(items):
            tid = inherited.get(c)
            if tid is None:
                tid = next_id
                next_id += 1
            cur.append((tid, m))
        out.append(FrameSegmentation(f.width, f.height, dict(cur)))
        prev = cur
    return out
