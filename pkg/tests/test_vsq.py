import math

import numpy as np
import pytest

from vsqkit.mask import FrameSegmentation, rle_encode
from vsqkit.tube import SegmentTube, Window, build_tubes_from_ids
from vsqkit.vsq import (
    EvalConfig,
    VsqAccumulator,
    _score_video,
    enumerate_windows,
    evaluate_dataset,
    score_window,
    vsq_k,
)

W, H = 16, 12


def rect(u0, u1, v0, v1, w=W, h=H):
    grid = np.zeros((h, w))
    grid[v0:v1, u0:u1] = 1
    return rle_encode(grid)


def frame(masks: dict, w=W, h=H):
    return FrameSegmentation(w, h, masks)


def static_video(n_frames, masks: dict):
    return [frame(dict(masks)) for _ in range(n_frames)]


def test_enumerate_windows_examples():
    ws = enumerate_windows(100, 15, 15)
    assert [w.start for w in ws] == [0, 15, 30, 45, 60, 75]
    assert enumerate_windows(10, 15, 15) == []
    assert enumerate_windows(1, 1, 15) == [Window(0, 1)]
    with pytest.raises(ValueError):
        enumerate_windows(0, 1, 1)
    with pytest.raises(ValueError):
        enumerate_windows(5, 1, 0)


def test_vsq_k_arithmetic():
    assert vsq_k(VsqAccumulator(1, 0.8, 1, 1, 0)) == pytest.approx(100 * 0.8 / 1.5)
    assert vsq_k(VsqAccumulator(5)) == 100.0
    assert vsq_k(VsqAccumulator(5, 0.0, 0, 0, 2)) == 0.0
    assert vsq_k(VsqAccumulator(3, 4.0, 4, 0, 0)) == 100.0


def test_accumulator_merge():
    a = VsqAccumulator(5, 1.5, 2, 1, 0)
    b = VsqAccumulator(5, 0.25, 1, 0, 3)
    merged = a + b
    assert (merged.sum_tp_iou, merged.tp, merged.fp, merged.fn) == (1.75, 3, 1, 3)
    with pytest.raises(ValueError):
        a + VsqAccumulator(10)


def test_accumulator_merge_associative_commutative():
    rng = np.random.default_rng(30)
    accs = [
        VsqAccumulator(5, float(rng.random()), int(rng.integers(5)), int(rng.integers(5)), 0)
        for _ in range(6)
    ]
    left = accs[0]
    for a in accs[1:]:
        left = left + a
    right = accs[-1]
    for a in reversed(accs[:-1]):
        right = a + right
    assert left.tp == right.tp and left.fp == right.fp
    assert left.sum_tp_iou == pytest.approx(right.sum_tp_iou, abs=1e-12)


def test_score_window_perfect():
    frames = static_video(3, {1: rect(0, 4, 0, 4), 2: rect(6, 10, 2, 6)})
    tubes = build_tubes_from_ids(frames, Window(0, 3))
    acc = score_window(tubes, tubes)
    assert (acc.tp, acc.fp, acc.fn) == (2, 0, 0)
    assert acc.sum_tp_iou == 2.0
    assert vsq_k(acc) == 100.0


def test_score_window_example_with_spurious_prediction():
    gt = [SegmentTube(1, 0, [rect(0, 9, 0, 5)])]
    pred = [
        SegmentTube(10, 0, [rect(1, 10, 0, 5)]),  # overlap 40, union 50: IoU 0.8
        SegmentTube(11, 0, [rect(0, 2, 8, 10)]),  # spurious
    ]
    acc = score_window(gt, pred)
    assert (acc.tp, acc.fp, acc.fn) == (1, 1, 0)
    assert acc.sum_tp_iou == pytest.approx(0.8)
    assert vsq_k(acc) == pytest.approx(53.3333, abs=1e-3)


def test_score_window_no_predictions():
    frames = static_video(2, {1: rect(0, 4, 0, 4), 2: rect(6, 10, 2, 6)})
    tubes = build_tubes_from_ids(frames, Window(0, 2))
    acc = score_window(tubes, [], window=Window(0, 2))
    assert (acc.tp, acc.fp, acc.fn) == (0, 0, 2)
    assert vsq_k(acc) == 0.0


def test_score_window_empty_needs_window():
    with pytest.raises(ValueError):
        score_window([], [])
    acc = score_window([], [], window=Window(0, 4))
    assert acc.k == 4 and acc.is_zero()


def test_score_window_mismatched_windows_error():
    a = SegmentTube(1, 0, [rect(0, 4, 0, 4)])
    b = SegmentTube(1, 1, [rect(0, 4, 0, 4)])
    with pytest.raises(ValueError):
        score_window([a], [b])


def test_zero_overlap_pairs_fall_to_fp_fn():
    gt = [SegmentTube(1, 0, [rect(0, 3, 0, 3)])]
    pred = [SegmentTube(2, 0, [rect(8, 11, 8, 11)])]
    acc = score_window(gt, pred)
    assert (acc.tp, acc.fp, acc.fn) == (0, 1, 1)


def test_tp_threshold_prunes_weak_matches():
    gt = [SegmentTube(1, 0, [rect(0, 9, 0, 5)])]
    pred = [SegmentTube(10, 0, [rect(1, 10, 0, 5)])]  # IoU 0.8
    assert score_window(gt, pred, tp_threshold=0.5).tp == 1
    weak = score_window(gt, pred, tp_threshold=0.9)
    assert (weak.tp, weak.fp, weak.fn) == (0, 1, 1)


def random_partition_frame(rng, n_ids=4, w=W, h=H):
    """Ground-truth-style frame: ids partition the labeled pixels."""
    grid = rng.integers(0, n_ids + 1, size=(h, w))
    from vsqkit.mask import frame_from_id_map

    return frame_from_id_map(grid)


def test_evaluate_identity_is_exactly_100():
    rng = np.random.default_rng(31)
    videos = []
    for _ in range(3):
        frames = [random_partition_frame(rng) for _ in range(20)]
        videos.append((frames, frames))
    report = evaluate_dataset(videos, EvalConfig(k_set=(1, 5, 10, 15), stride=5))
    assert all(v == 100.0 for v in report.per_k.values())
    assert report.vsq == 100.0


def test_evaluate_rejects_overlapping_ground_truth():
    overlapping = frame({1: rect(0, 6, 0, 6), 2: rect(3, 9, 3, 9)})
    with pytest.raises(ValueError, match="overlap"):
        evaluate_dataset([([overlapping], [frame({})])], EvalConfig(k_set=(1,), stride=1))


def test_two_video_hand_bookkeeping():
    obj = {1: rect(0, 4, 0, 4)}
    video_a = (static_video(2, obj), static_video(2, obj))  # perfect
    video_b = (static_video(2, obj), static_video(2, {}))  # all missed
    report = evaluate_dataset([video_a, video_b], EvalConfig(k_set=(1, 2), stride=1))
    # k=1: A gives tp=2 iou=2 over2 windows; B gives fn=2
    assert report.counts[1] == {"tp": 2, "fp": 0, "fn": 2}
    assert report.per_k[1] == pytest.approx(100 * 2 / (2 + 1))
    # k=2: one window per video
    assert report.counts[2] == {"tp": 1, "fp": 0, "fn": 1}
    assert report.per_k[2] == pytest.approx(100 * 1 / 1.5)
    assert report.vsq == pytest.approx((report.per_k[1] + report.per_k[2]) / 2)


def test_id_relabel_invariance():
    rng = np.random.default_rng(32)
    gt = []
    pred = []
    for _ in range(10):
        f = random_partition_frame(rng)
        gt.append(f)
        pred.append(frame({i + 100: m for i, m in f.masks.items()}))
    relabeled = [frame({i * 7 + 3: m for i, m in f.masks.items()}) for f in pred]
    cfg = EvalConfig(k_set=(1, 5), stride=2)
    r1 = evaluate_dataset([(gt, pred)], cfg)
    r2 = evaluate_dataset([(gt, relabeled)], cfg)
    assert r1.per_k == r2.per_k
    assert r1.counts == r2.counts


def test_flicker_monotone_penalty():
    masks = {1: rect(0, 4, 0, 4), 2: rect(6, 10, 2, 6)}
    gt = static_video(61, masks)
    flickered = [frame(dict(masks)) if t % 2 == 0 else frame({}) for t in range(61)]
    cfg = EvalConfig(k_set=(1, 5, 10, 15), stride=15)
    report = evaluate_dataset([(gt, flickered)], cfg)
    per = report.per_k
    assert per[1] < 100.0
    for k in (5, 10, 15):
        assert per[k] < 100.0
        assert per[k] < per[1]
    assert per[1] >= per[5] >= per[10] >= per[15]


def test_split_reduces_only_spanning_windows():
    masks = {1: rect(0, 4, 0, 4), 2: rect(6, 10, 2, 6)}
    n = 66  # split lands at frame 33, inside the k>1 windows starting at 30
    gt = static_video(n, masks)
    mid = n // 2
    pred = [
        frame(dict(masks)) if t < mid else frame({i + 50: m for i, m in masks.items()})
        for t in range(n)
    ]
    report = evaluate_dataset([(gt, pred)], EvalConfig(k_set=(1, 5, 10, 15), stride=15))
    assert report.per_k[1] == 100.0
    for k in (5, 10, 15):
        assert report.per_k[k] < 100.0


def test_fast_path_matches_score_window():
    rng = np.random.default_rng(33)
    gt_frames = []
    pred_frames = []
    for _ in range(12):
        p = {i: rle_encode(rng.random((H, W)) < 0.3) for i in range(1, 6)}
        gt_frames.append(random_partition_frame(rng))
        pred_frames.append(frame(p))
    cfg = EvalConfig(k_set=(1, 3, 5), stride=2)
    fast = _score_video(gt_frames, pred_frames, cfg)
    for k in cfg.k_set:
        for w, acc in zip(enumerate_windows(12, k, 2), fast[k]):
            ref = score_window(
                build_tubes_from_ids(gt_frames, w),
                build_tubes_from_ids(pred_frames, w),
                window=w,
            )
            assert (acc.tp, acc.fp, acc.fn) == (ref.tp, ref.fp, ref.fn)
            assert acc.sum_tp_iou == ref.sum_tp_iou


def test_fast_path_matches_score_window_frame_averaged():
    rng = np.random.default_rng(34)
    gt_frames = [random_partition_frame(rng, n_ids=2) for _ in range(6)]
    pred_frames = [frame({9: rle_encode(rng.random((H, W)) < 0.3)}) for _ in range(6)]
    cfg = EvalConfig(k_set=(3,), stride=3, frame_averaged_iou=True)
    fast = _score_video(gt_frames, pred_frames, cfg)
    for w, acc in zip(enumerate_windows(6, 3, 3), fast[3]):
        ref = score_window(
            build_tubes_from_ids(gt_frames, w),
            build_tubes_from_ids(pred_frames, w),
            window=w,
            frame_averaged_iou=True,
        )
        assert acc.sum_tp_iou == ref.sum_tp_iou
        assert (acc.tp, acc.fp, acc.fn) == (ref.tp, ref.fp, ref.fn)


def test_empty_window_conventions():
    gt = static_video(4, {})
    pred = static_video(4, {})
    base = EvalConfig(k_set=(1, 2), stride=1)
    report = evaluate_dataset([(gt, pred)], base)
    assert report.per_k == {1: 100.0, 2: 100.0}
    skipped = evaluate_dataset(
        [(gt, pred)], EvalConfig(k_set=(1, 2), stride=1, skip_empty_windows=True)
    )
    assert skipped.per_k == {1: None, 2: None}
    assert skipped.vsq is None


def test_per_video_macro_average():
    obj = {1: rect(0, 4, 0, 4)}
    perfect = (static_video(2, obj), static_video(2, obj))
    missed = (static_video(2, obj), static_video(2, {}))
    micro = evaluate_dataset([perfect, missed], EvalConfig(k_set=(1,), stride=1))
    macro = evaluate_dataset(
        [perfect, missed], EvalConfig(k_set=(1,), stride=1, per_video=True)
    )
    assert micro.per_k[1] == pytest.approx(100 * 2 / 3)
    assert macro.per_k[1] == pytest.approx((100.0 + 0.0) / 2)
    assert macro.per_video[0][1] == 100.0
    assert macro.per_video[1][1] == 0.0


def test_link_predictions_flag_restores_consistency():
    from vsqkit.synth import perturb_segmentation

    masks = {1: rect(0, 4, 0, 4), 2: rect(6, 10, 2, 6)}
    gt = static_video(10, masks)
    shuffled = perturb_segmentation(gt, "random-ids", seed=5)
    cfg = EvalConfig(k_set=(1, 5), stride=2)
    broken = evaluate_dataset([(gt, shuffled)], cfg)
    linked = evaluate_dataset(
        [(gt, shuffled)], EvalConfig(k_set=(1, 5), stride=2, link_predictions=True)
    )
    assert broken.per_k[5] < 100.0  # shuffling ids breaks tubes
    assert linked.per_k == {1: 100.0, 5: 100.0}


def test_jobs_do_not_change_results():
    rng = np.random.default_rng(35)
    videos = []
    for _ in range(5):
        gt = [random_partition_frame(rng) for _ in range(9)]
        pred = [
            frame({i: rle_encode(rng.random((H, W)) < 0.25) for i in range(1, 4)})
            for _ in range(9)
        ]
        videos.append((gt, pred))
    r1 = evaluate_dataset(videos, EvalConfig(k_set=(1, 3), stride=2, jobs=1))
    r4 = evaluate_dataset(videos, EvalConfig(k_set=(1, 3), stride=2, jobs=4))
    assert r1.per_k == r4.per_k
    assert r1.counts == r4.counts
    assert r1.vsq == r4.vsq


def test_video_validation_errors():
    obj = {1: rect(0, 4, 0, 4)}
    with pytest.raises(ValueError, match="video 0"):
        evaluate_dataset([(static_video(3, obj), static_video(2, obj))])
    small = [FrameSegmentation(4, 4, {})]
    with pytest.raises(ValueError, match="dimensions"):
        evaluate_dataset([(static_video(1, obj), small)])


def test_sum_tp_iou_bounded_by_tp():
    rng = np.random.default_rng(36)
    for _ in range(100):
        gt = [random_partition_frame(rng, n_ids=2)]
        pred = [frame({i: rle_encode(rng.random((H, W)) < 0.3) for i in range(3)})]
        acc = _score_video(gt, pred, EvalConfig(k_set=(1,), stride=1))[1][0]
        assert acc.sum_tp_iou <= acc.tp + 1e-12
