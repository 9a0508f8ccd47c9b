"""Run-length encoded binary masks and pixel-set geometry.

Masks are stored as alternating background/foreground run lengths over the
column-major pixel order (linear index = u * height + v), first run counting
background pixels. This matches the de-facto RLE interchange convention so
externally produced masks can be ingested bit-exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class PixelPoint(NamedTuple):
    """Integer pixel coordinate: u is the column index, v the row index."""

    u: int
    v: int


def round_half_up(x: float) -> int:
    """Round to the nearest integer, halves toward +infinity."""
    return int(math.floor(x + 0.5))


@dataclass(eq=False)
class RleMask:
    """Immutable binary mask in column-major RLE form.

    `runs` alternates background/foreground pixel counts and sums to
    width * height. `area` caches the foreground pixel count. Instances
    must not be mutated after construction; they are safe to share.
    """

    width: int
    height: int
    runs: np.ndarray
    area: int
    _cum: np.ndarray | None = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.width * self.height

    def is_empty(self) -> bool:
        return self.area == 0

    def decode(self) -> np.ndarray:
        """Expand to a dense (height, width) boolean grid."""
        n = len(self.runs)
        vals = np.tile([False, True], (n + 1) // 2)[:n]
        flat = np.repeat(vals, self.runs)
        return flat.reshape(self.width, self.height).T

    def _cumulative(self) -> np.ndarray:
        if self._cum is None:
            self._cum = np.cumsum(self.runs)
        return self._cum

    def contains(self, u: int, v: int) -> bool:
        """Membership test for pixel (u, v); out-of-bounds is False."""
        if not (0 <= u < self.width and 0 <= v < self.height):
            return False
        p = u * self.height + v
        j = int(np.searchsorted(self._cumulative(), p, side="right"))
        return j % 2 == 1

    def first_foreground(self) -> int:
        """Linear index of the first foreground pixel; size when empty."""
        if self.area == 0:
            return self.size
        return int(self.runs[0])

    def foreground_indices(self) -> np.ndarray:
        """Column-major linear indices of all foreground pixels."""
        bounds = np.concatenate([[0], np.cumsum(self.runs)])
        starts = bounds[1:-1:2]
        ends = bounds[2::2]
        if starts.size == 0:
            return np.empty(0, dtype=np.int64)
        return np.concatenate([np.arange(s, e) for s, e in zip(starts, ends)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RleMask):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and np.array_equal(self.runs, other.runs)
        )


def empty_mask(width: int, height: int) -> RleMask:
    if width <= 0 or height <= 0:
        raise ValueError("mask dimensions must be positive")
    return RleMask(width, height, np.array([width * height], dtype=np.int64), 0)


def rle_encode(grid: np.ndarray) -> RleMask:
    """Encode a dense (height, width) binary grid. Lossless."""
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("mask dimensions must be positive")
    h, w = arr.shape
    flat = (arr != 0).T.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]])
    runs = np.diff(bounds)
    if flat[0]:
        runs = np.concatenate([[0], runs])
    runs = runs.astype(np.int64)
    area = int(runs[1::2].sum())
    return RleMask(w, h, runs, area)


def rle_from_runs(width: int, height: int, runs: Iterable[int]) -> RleMask:
    """Build a mask from raw run lengths, canonicalizing zero-length runs.

    Raises ValueError when the run lengths are negative or do not sum to
    width * height.
    """
    if width <= 0 or height <= 0:
        raise ValueError("mask dimensions must be positive")
    raw = np.asarray(list(runs), dtype=np.int64)
    if raw.ndim != 1:
        raise ValueError("runs must be a flat sequence")
    if raw.size and (raw < 0).any():
        raise ValueError("run lengths must be non-negative")
    if int(raw.sum()) != width * height:
        raise ValueError("run lengths must sum to width*height")
    # merge zero-length runs so equality and traversals see one canonical form
    merged: list[list[int]] = []  # [is_foreground, length]
    for i, n in enumerate(raw):
        if n == 0:
            continue
        v = i % 2
        if merged and merged[-1][0] == v:
            merged[-1][1] += int(n)
        else:
            merged.append([v, int(n)])
    lengths: list[int] = []
    if not merged or merged[0][0] == 1:
        lengths.append(0)
    lengths.extend(n for _, n in merged)
    canon = np.asarray(lengths, dtype=np.int64)
    return RleMask(width, height, canon, int(canon[1::2].sum()))


def _check_same_dims(a: RleMask, b: RleMask) -> None:
    if a.width != b.width or a.height != b.height:
        raise ValueError(
            f"mask dimension mismatch: {a.width}x{a.height} vs {b.width}x{b.height}"
        )


def intersection_area(a: RleMask, b: RleMask) -> int:
    """Count of pixels foreground in both masks."""
    _check_same_dims(a, b)
    if a.area == 0 or b.area == 0:
        return 0
    ca = a._cumulative()
    cb = b._cumulative()
    bounds = np.union1d(ca, cb)
    prev = np.concatenate([[0], bounds[:-1]])
    ia = np.searchsorted(ca, prev, side="right")
    ib = np.searchsorted(cb, prev, side="right")
    both = (ia % 2 == 1) & (ib % 2 == 1)
    return int((bounds - prev)[both].sum())


def union_area(a: RleMask, b: RleMask) -> int:
    _check_same_dims(a, b)
    return a.area + b.area - intersection_area(a, b)


def iou(a: RleMask, b: RleMask) -> float:
    """Intersection over union; 0.0 when both masks are empty."""
    _check_same_dims(a, b)
    u = union_area(a, b)
    if u == 0:
        return 0.0
    return intersection_area(a, b) / u


def f_measure(a: RleMask, b: RleMask) -> float:
    """2|a n b| / (|a| + |b|); 0.0 when both masks are empty."""
    _check_same_dims(a, b)
    denom = a.area + b.area
    if denom == 0:
        return 0.0
    return 2.0 * intersection_area(a, b) / denom


def mask_union(masks: Sequence[RleMask]) -> RleMask:
    """Pixelwise union of one or more same-sized masks."""
    if not masks:
        raise ValueError("mask_union needs at least one mask")
    first = masks[0]
    if len(masks) == 1:
        return first
    acc = first.decode()
    for m in masks[1:]:
        _check_same_dims(first, m)
        acc |= m.decode()
    return rle_encode(acc)


def centroid_in_mask(m: RleMask) -> PixelPoint:
    """Foreground pixel closest to the mean of the foreground coordinates.

    The per-axis round-half-up of the mean is returned when it lands on
    foreground; otherwise the nearest foreground pixel by Euclidean
    distance to the (unrounded) mean, ties broken by smallest (v, u).
    """
    if m.area == 0:
        raise ValueError("centroid of an empty mask is undefined")
    idx = m.foreground_indices()
    us = idx // m.height
    vs = idx % m.height
    mu = float(us.mean())
    mv = float(vs.mean())
    u = round_half_up(mu)
    v = round_half_up(mv)
    if m.contains(u, v):
        return PixelPoint(u, v)
    d2 = (us - mu) ** 2 + (vs - mv) ** 2
    j = int(np.lexsort((us, vs, d2))[0])
    return PixelPoint(int(us[j]), int(vs[j]))


@dataclass
class FrameSegmentation:
    """Instance masks of a single frame, keyed by instance/track id.

    Ground truth segmentations partition their labeled pixels; predicted
    segmentations may contain overlapping masks.
    """

    width: int
    height: int
    masks: dict[int, RleMask] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("frame dimensions must be positive")
        for i, m in self.masks.items():
            if m.width != self.width or m.height != self.height:
                raise ValueError(f"mask for id {i} does not match frame dimensions")

    def ids(self) -> list[int]:
        return sorted(self.masks)

    def add(self, instance_id: int, m: RleMask) -> None:
        if instance_id in self.masks:
            raise ValueError(f"duplicate instance id {instance_id}")
        if m.width != self.width or m.height != self.height:
            raise ValueError("mask does not match frame dimensions")
        self.masks[instance_id] = m

    def mask_for(self, instance_id: int) -> RleMask:
        """Stored mask for the id, or the empty mask when absent."""
        got = self.masks.get(instance_id)
        return got if got is not None else empty_mask(self.width, self.height)


def frame_from_id_map(grid: np.ndarray, background: int = 0) -> FrameSegmentation:
    """Split a dense instance-id grid into one RLE mask per id.

    Pixels equal to `background` carry no mask. The produced masks
    partition the labeled pixels by construction.
    """
    arr = np.asarray(grid)
    if arr.ndim != 2 or arr.shape[0] == 0 or arr.shape[1] == 0:
        raise ValueError("id map dimensions must be positive")
    h, w = arr.shape
    flat = arr.T.ravel()
    change = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate([[0], change, [flat.size]]).astype(np.int64)
    vals = flat[bounds[:-1]]
    per_id: dict[int, list[tuple[int, int]]] = {}
    for s, e, v in zip(bounds[:-1], bounds[1:], vals):
        if v != background:
            per_id.setdefault(int(v), []).append((int(s), int(e)))
    out = FrameSegmentation(w, h, {})
    total = flat.size
    for vid in sorted(per_id):
        runs: list[int] = []
        pos = 0
        for s, e in per_id[vid]:
            runs.append(s - pos)
            runs.append(e - s)
            pos = e
        if pos < total:
            runs.append(total - pos)
        arr_runs = np.asarray(runs, dtype=np.int64)
        out.add(vid, RleMask(w, h, arr_runs, int(arr_runs[1::2].sum())))
    return out
