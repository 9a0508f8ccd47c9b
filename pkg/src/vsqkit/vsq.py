"""Video segmentation quality: window scoring and dataset aggregation.

Per window, ground-truth and predicted tubes are matched by maximizing the
summed volumetric F-measure; matched pairs are true positives and their
IoU accumulates into the window score

    100 * sum(IoU over TP) / (|TP| + |FP|/2 + |FN|/2).

Window accumulators are pooled over all windows and videos of a dataset
(micro-average) before the ratio is taken; a per-video macro-average is
available behind a flag. The final score is the unweighted mean over the
configured window lengths.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .assignment import solve_max_assignment
from .mask import FrameSegmentation, intersection_area
from .tube import (
    SegmentTube,
    Window,
    frame_averaged_tube_iou,
    link_frame_predictions,
)

DEFAULT_K_SET = (1, 5, 10, 15)
DEFAULT_STRIDE = 15


@dataclass
class VsqAccumulator:
    """TP/FP/FN counts plus the accumulated IoU over true positives."""

    k: int
    sum_tp_iou: float = 0.0
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __iadd__(self, other: "VsqAccumulator") -> "VsqAccumulator":
        if self.k != other.k:
            raise ValueError("cannot merge accumulators with different window lengths")
        self.sum_tp_iou += other.sum_tp_iou
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        return self

    def __add__(self, other: "VsqAccumulator") -> "VsqAccumulator":
        merged = VsqAccumulator(self.k, self.sum_tp_iou, self.tp, self.fp, self.fn)
        merged += other
        return merged

    def is_zero(self) -> bool:
        return self.tp == 0 and self.fp == 0 and self.fn == 0


def vsq_k(acc: VsqAccumulator) -> float:
    """Window-length score as a percentage; vacuously 100 when empty."""
    denom = acc.tp + 0.5 * acc.fp + 0.5 * acc.fn
    if denom == 0:
        return 100.0
    return 100.0 * acc.sum_tp_iou / denom


def enumerate_windows(video_length: int, k: int, stride: int) -> list[Window]:
    """Complete windows starting at 0, stride, 2*stride, ...

    Incomplete trailing windows are dropped.
    """
    if video_length < 1 or k < 1 or stride < 1:
        raise ValueError("video length, window length, and stride must be positive")
    return [Window(s, k) for s in range(0, video_length - k + 1, stride)]


@dataclass
class EvalConfig:
    """Knobs for dataset evaluation; defaults follow the standard protocol."""

    k_set: tuple[int, ...] = DEFAULT_K_SET
    stride: int = DEFAULT_STRIDE
    tp_threshold: float = 0.0
    frame_averaged_iou: bool = False
    per_video: bool = False
    skip_empty_windows: bool = False
    link_predictions: bool = False
    jobs: int = 1

    def __post_init__(self) -> None:
        if not self.k_set:
            raise ValueError("k_set must not be empty")
        if any(k < 1 for k in self.k_set) or self.stride < 1:
            raise ValueError("window lengths and stride must be positive")
        if self.tp_threshold < 0.0 or self.tp_threshold >= 1.0:
            raise ValueError("tp_threshold must lie in [0, 1)")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")


@dataclass
class VsqReport:
    """Evaluation result: per-k percentages and their mean."""

    k_set: tuple[int, ...]
    window_stride: int
    per_k: dict[int, float | None]
    vsq: float | None
    counts: dict[int, dict[str, int]]
    per_video: dict[int, dict[int, float | None]] = field(default_factory=dict)


def _accumulate(
    inter: np.ndarray,
    gt_areas: np.ndarray,
    pred_areas: np.ndarray,
    k: int,
    tp_threshold: float,
    pair_iou=None,
) -> VsqAccumulator:
    """Shared TP/FP/FN bookkeeping given integer tube intersections.

    `pair_iou(r, c)` overrides the volumetric IoU of a matched pair (used
    for the frame-averaged variant); matching always uses the volumetric
    F-measure.
    """
    acc = VsqAccumulator(k=k)
    n_gt, n_pred = inter.shape
    if n_gt == 0 or n_pred == 0:
        acc.fn = n_gt
        acc.fp = n_pred
        return acc
    denom = gt_areas[:, None] + pred_areas[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        f = np.where(denom > 0, 2.0 * inter / denom, 0.0)
    matching = solve_max_assignment(f)
    ious: list[float] = []
    for r, c in matching.pairs:
        if pair_iou is not None:
            value = pair_iou(r, c)
        else:
            union = gt_areas[r] + pred_areas[c] - inter[r, c]
            value = inter[r, c] / union
        if value > tp_threshold:
            ious.append(float(value))
    acc.tp = len(ious)
    acc.sum_tp_iou = math.fsum(ious)
    acc.fp = n_pred - acc.tp
    acc.fn = n_gt - acc.tp
    return acc


def score_window(
    gt: list[SegmentTube],
    pred: list[SegmentTube],
    window: Window | None = None,
    tp_threshold: float = 0.0,
    frame_averaged_iou: bool = False,
) -> VsqAccumulator:
    """Match one window's tubes and return its accumulator.

    All tubes must share the same window; pass `window` explicitly when
    both tube lists may be empty.
    """
    tubes = gt + pred
    if tubes:
        ref = tubes[0]
        for t in tubes:
            if t.start_frame != ref.start_frame or t.length != ref.length:
                raise ValueError("tubes cover different windows")
            if (
                t.masks[0].width != ref.masks[0].width
                or t.masks[0].height != ref.masks[0].height
            ):
                raise ValueError("tubes have mismatched mask dimensions")
        if window is not None and (
            window.start != ref.start_frame or window.length != ref.length
        ):
            raise ValueError("tubes do not match the given window")
        k = ref.length
    elif window is not None:
        k = window.length
    else:
        raise ValueError("window is required when both tube lists are empty")

    inter = np.zeros((len(gt), len(pred)), dtype=np.int64)
    for r, g in enumerate(gt):
        for c, p in enumerate(pred):
            inter[r, c] = sum(
                intersection_area(a, b) for a, b in zip(g.masks, p.masks)
            )
    gt_areas = np.asarray([t.total_area for t in gt], dtype=np.int64)
    pred_areas = np.asarray([t.total_area for t in pred], dtype=np.int64)
    pair_iou = None
    if frame_averaged_iou:

        def pair_iou(r, c):
            return frame_averaged_tube_iou(gt[r], pred[c])

    return _accumulate(inter, gt_areas, pred_areas, k, tp_threshold, pair_iou)


class _VideoCache:
    """Per-video frame caches reused across window lengths.

    Ground-truth frames are non-overlapping, so each frame flattens into
    a column-major id-index map and one bincount per (prediction mask,
    frame) yields its intersection with every ground-truth instance at
    once. Predictions may overlap and are cached as foreground index
    lists. The id map itself is rebuilt per window visit to keep the
    cache proportional to foreground area, not image area.
    """

    def __init__(self, gt: list[FrameSegmentation], pred: list[FrameSegmentation]):
        self.n_frames = len(gt)
        self.n_pixels = gt[0].width * gt[0].height
        self.gt_ids = sorted({i for f in gt for i in f.masks})
        self.pred_ids = sorted({i for f in pred for i in f.masks})
        gt_row = {i: r for r, i in enumerate(self.gt_ids)}
        n_gt, n_pred = len(self.gt_ids), len(self.pred_ids)
        self.gt_areas = np.zeros((n_gt, self.n_frames), dtype=np.int64)
        self.pred_areas = np.zeros((n_pred, self.n_frames), dtype=np.int64)
        self.gt_fg: list[list[tuple[int, np.ndarray]]] = []
        self.pred_fg: list[list[np.ndarray | None]] = []
        self.gt_frames = gt
        self.pred_frames = pred
        for t, f in enumerate(gt):
            rows = []
            for i, m in f.masks.items():
                if m.area:
                    rows.append((gt_row[i], m.foreground_indices().astype(np.int32)))
                    self.gt_areas[gt_row[i], t] = m.area
            self.gt_fg.append(rows)
            if rows:
                painted = np.zeros(self.n_pixels, dtype=bool)
                for _, idx in rows:
                    painted[idx] = True
                if int(painted.sum()) != int(self.gt_areas[:, t].sum()):
                    raise ValueError(
                        f"ground-truth masks overlap in frame {t}; "
                        "ground truth must partition its labeled pixels"
                    )
        for t, f in enumerate(pred):
            per_frame: list[np.ndarray | None] = []
            for c, i in enumerate(self.pred_ids):
                m = f.masks.get(i)
                if m is None or m.area == 0:
                    per_frame.append(None)
                else:
                    per_frame.append(m.foreground_indices().astype(np.int32))
                    self.pred_areas[c, t] = m.area
            self.pred_fg.append(per_frame)

    def _gt_map(self, t: int) -> np.ndarray:
        flat = np.zeros(self.n_pixels, dtype=np.int32)
        for row, idx in self.gt_fg[t]:
            flat[idx] = row + 1
        return flat

    def window_accumulator(
        self, window: Window, tp_threshold: float, frame_averaged_iou: bool
    ) -> VsqAccumulator:
        s, e = window.start, window.stop
        gt_on = np.flatnonzero(self.gt_areas[:, s:e].sum(axis=1) > 0)
        pred_on = np.flatnonzero(self.pred_areas[:, s:e].sum(axis=1) > 0)
        n_gt_all = len(self.gt_ids)
        inter_full = np.zeros((n_gt_all, len(pred_on)), dtype=np.int64)
        for t in range(s, e):
            fg = self.pred_fg[t]
            if not any(fg[c] is not None for c in pred_on):
                continue
            gt_map = self._gt_map(t)
            for j, c in enumerate(pred_on):
                idx = fg[c]
                if idx is None:
                    continue
                counts = np.bincount(gt_map[idx], minlength=n_gt_all + 1)
                inter_full[:, j] += counts[1:]
        inter = inter_full[gt_on, :]
        gt_areas = self.gt_areas[gt_on, s:e].sum(axis=1)
        pred_areas = self.pred_areas[pred_on, s:e].sum(axis=1)
        pair_iou = None
        if frame_averaged_iou:
            gt_tube: dict[int, SegmentTube] = {}
            pred_tube: dict[int, SegmentTube] = {}

            def pair_iou(r, c):
                if r not in gt_tube:
                    gid = self.gt_ids[gt_on[r]]
                    gt_tube[r] = SegmentTube(
                        gid, s, [f.mask_for(gid) for f in self.gt_frames[s:e]]
                    )
                if c not in pred_tube:
                    pid = self.pred_ids[pred_on[c]]
                    pred_tube[c] = SegmentTube(
                        pid, s, [f.mask_for(pid) for f in self.pred_frames[s:e]]
                    )
                return frame_averaged_tube_iou(gt_tube[r], pred_tube[c])

        return _accumulate(
            inter, gt_areas, pred_areas, window.length, tp_threshold, pair_iou
        )


def _validate_video(i: int, gt: list[FrameSegmentation], pred: list[FrameSegmentation]):
    if len(gt) != len(pred):
        raise ValueError(
            f"video {i}: ground truth has {len(gt)} frames but predictions have {len(pred)}"
        )
    if not gt:
        raise ValueError(f"video {i}: empty video")
    w, h = gt[0].width, gt[0].height
    for f in list(gt) + list(pred):
        if f.width != w or f.height != h:
            raise ValueError(f"video {i}: inconsistent frame dimensions")


def _score_video(
    gt: list[FrameSegmentation], pred: list[FrameSegmentation], cfg: EvalConfig
) -> dict[int, list[VsqAccumulator]]:
    if cfg.link_predictions:
        pred = link_frame_predictions(pred)
    cache = _VideoCache(gt, pred)
    out: dict[int, list[VsqAccumulator]] = {}
    for k in cfg.k_set:
        accs = []
        for w in enumerate_windows(cache.n_frames, k, cfg.stride):
            accs.append(
                cache.window_accumulator(w, cfg.tp_threshold, cfg.frame_averaged_iou)
            )
        out[k] = accs
    return out


def _ratio_or_none(acc: VsqAccumulator, skip_empty: bool) -> float | None:
    if skip_empty and acc.is_zero():
        return None
    return vsq_k(acc)


def evaluate_dataset(
    videos: list[tuple[list[FrameSegmentation], list[FrameSegmentation]]],
    config: EvalConfig | None = None,
) -> VsqReport:
    """Score a whole dataset of (ground truth frames, prediction frames).

    Accumulators from every window of every video are merged in a fixed
    order, so results are identical for any job count.
    """
    cfg = config if config is not None else EvalConfig()
    for i, (gt, pred) in enumerate(videos):
        _validate_video(i, gt, pred)

    if cfg.jobs > 1 and len(videos) > 1:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            per_video = list(
                pool.map(lambda v: _score_video(v[0], v[1], cfg), videos)
            )
    else:
        per_video = [_score_video(gt, pred, cfg) for gt, pred in videos]

    per_k: dict[int, float | None] = {}
    counts: dict[int, dict[str, int]] = {}
    video_values: dict[int, dict[int, float | None]] = {
        i: {} for i in range(len(videos))
    }
    for k in cfg.k_set:
        pooled = VsqAccumulator(k=k)
        video_scores: list[float] = []
        for i, accs in enumerate(per_video):
            merged = VsqAccumulator(k=k)
            for acc in accs[k]:
                merged += acc
            pooled += merged
            value = _ratio_or_none(merged, cfg.skip_empty_windows)
            video_values[i][k] = value
            if value is not None:
                video_scores.append(value)
        counts[k] = {"tp": pooled.tp, "fp": pooled.fp, "fn": pooled.fn}
        if cfg.per_video:
            per_k[k] = float(np.mean(video_scores)) if video_scores else None
        else:
            per_k[k] = _ratio_or_none(pooled, cfg.skip_empty_windows)

    valid = [v for v in per_k.values() if v is not None]
    vsq = float(np.mean(valid)) if valid else None
    return VsqReport(
        k_set=tuple(cfg.k_set),
        window_stride=cfg.stride,
        per_k=per_k,
        vsq=vsq,
        counts=counts,
        per_video=video_values,
    )
