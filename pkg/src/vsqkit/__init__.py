"""Toolkit for class-agnostic video instance segmentation evaluation.

Components: an overlap-tolerant video segmentation quality metric with
tube matching, a geometric self-prompting tracker that re-identifies
per-frame segments through depth and camera pose, an embodiment-aware
trajectory densifier, and a synthetic RGB-D scene generator that makes
all of it verifiable end to end.
"""

from .assignment import Matching, solve_max_assignment
from .camgeo import (
    CameraModel,
    Projection,
    camera_from_pose,
    intrinsics_matrix,
    project,
    prompt_visible,
    unproject,
)
from .errors import FormatError, ValidationError, VsqkitError
from .mask import (
    FrameSegmentation,
    PixelPoint,
    RleMask,
    centroid_in_mask,
    empty_mask,
    f_measure,
    frame_from_id_map,
    intersection_area,
    iou,
    mask_union,
    rle_encode,
    rle_from_runs,
    union_area,
)
from .synth import BoxSpec, SceneSpec, perturb_segmentation, render_frame, render_video
from .tracker import SelfPrompt, TrackerConfig, TrackerState, run_video, step
from .trajectory import (
    EmbodimentConfig,
    Waypose,
    apply_embodiment,
    densify_path,
    densify_segment,
    geodesic_angle,
    slerp,
)
from .tube import (
    SegmentTube,
    Window,
    build_tubes_from_ids,
    frame_averaged_tube_iou,
    link_frame_predictions,
    tube_f_measure,
    tube_iou,
)
from .vsq import (
    EvalConfig,
    VsqAccumulator,
    VsqReport,
    enumerate_windows,
    evaluate_dataset,
    score_window,
    vsq_k,
)

__version__ = "0.1.0"

__all__ = [
    "BoxSpec",
    "CameraModel",
    "EmbodimentConfig",
    "EvalConfig",
    "FormatError",
    "FrameSegmentation",
    "Matching",
    "PixelPoint",
    "Projection",
    "RleMask",
    "SceneSpec",
    "SegmentTube",
    "SelfPrompt",
    "TrackerConfig",
    "TrackerState",
    "ValidationError",
    "VsqAccumulator",
    "VsqReport",
    "VsqkitError",
    "Waypose",
    "Window",
    "apply_embodiment",
    "build_tubes_from_ids",
    "camera_from_pose",
    "centroid_in_mask",
    "densify_path",
    "densify_segment",
    "empty_mask",
    "enumerate_windows",
    "evaluate_dataset",
    "f_measure",
    "frame_averaged_tube_iou",
    "frame_from_id_map",
    "geodesic_angle",
    "intersection_area",
    "intrinsics_matrix",
    "iou",
    "link_frame_predictions",
    "mask_union",
    "perturb_segmentation",
    "project",
    "prompt_visible",
    "render_frame",
    "render_video",
    "rle_encode",
    "rle_from_runs",
    "run_video",
    "score_window",
    "slerp",
    "solve_max_assignment",
    "step",
    "tube_f_measure",
    "tube_iou",
    "union_area",
    "unproject",
    "vsq_k",
]
