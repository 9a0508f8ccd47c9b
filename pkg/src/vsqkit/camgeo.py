"""Pinhole camera model: projection, depth unprojection, visibility.

Conventions: extrinsics map world coordinates to camera coordinates, the
camera looks along +z in its own frame, and the pixel origin is the
top-left corner with u growing rightward and v downward. Pixel rounding
is round-half-up per axis, matching the mask centroid convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .mask import PixelPoint, round_half_up

ROTATION_TOL = 1e-9
DEPTH_NO_READING = 0.0
DEFAULT_VISIBILITY_TOL = 0.05


@dataclass
class CameraModel:
    """Intrinsic matrix plus world-to-camera rigid transform."""

    intrinsics: np.ndarray
    rotation: np.ndarray
    translation: np.ndarray
    width: int
    height: int

    def __post_init__(self) -> None:
        self.intrinsics = np.asarray(self.intrinsics, dtype=np.float64)
        self.rotation = np.asarray(self.rotation, dtype=np.float64)
        self.translation = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if self.intrinsics.shape != (3, 3):
            raise ValueError("intrinsics must be a 3x3 matrix")
        if self.rotation.shape != (3, 3):
            raise ValueError("rotation must be a 3x3 matrix")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("image dimensions must be positive")
        k = self.intrinsics
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        fixed = np.array([k[0, 1], k[1, 0], k[2, 0], k[2, 1], k[2, 2] - 1.0])
        if np.abs(fixed).max() > 0:
            raise ValueError("intrinsics must have pinhole structure [fx 0 cx; 0 fy cy; 0 0 1]")
        check_rotation(self.rotation)

    @property
    def fx(self) -> float:
        return float(self.intrinsics[0, 0])

    @property
    def fy(self) -> float:
        return float(self.intrinsics[1, 1])

    @property
    def cx(self) -> float:
        return float(self.intrinsics[0, 2])

    @property
    def cy(self) -> float:
        return float(self.intrinsics[1, 2])

    def projection_matrix(self) -> np.ndarray:
        """Composed 3x4 projection K [R | T]."""
        rt = np.hstack([self.rotation, self.translation.reshape(3, 1)])
        return self.intrinsics @ rt


def check_rotation(r: np.ndarray, tol: float = ROTATION_TOL) -> None:
    """Require an orthonormal matrix with determinant +1."""
    err = np.abs(r.T @ r - np.eye(3)).max()
    if err > tol:
        raise ValueError(f"rotation is not orthonormal (error {err:.2e})")
    det = float(np.linalg.det(r))
    if abs(det - 1.0) > 1e-6:
        raise ValueError(f"rotation determinant must be +1, got {det:.6f}")


def intrinsics_matrix(fx: float, fy: float, cx: float, cy: float) -> np.ndarray:
    return np.array([[fx, 0.0, cx], [0.0, fy, cy], [0.0, 0.0, 1.0]])


def camera_from_pose(
    intrinsics: np.ndarray,
    cam_to_world_rotation: np.ndarray,
    cam_position: np.ndarray,
    width: int,
    height: int,
) -> CameraModel:
    """Camera model from a camera pose given in the world frame."""
    r_c2w = np.asarray(cam_to_world_rotation, dtype=np.float64)
    pos = np.asarray(cam_position, dtype=np.float64).reshape(3)
    r = r_c2w.T
    t = -r @ pos
    return CameraModel(np.asarray(intrinsics, dtype=np.float64), r, t, width, height)


class Projection(NamedTuple):
    """Result of projecting a world point; behind-camera is a state, not an error."""

    pixel: PixelPoint | None
    depth: float
    in_bounds: bool


def project(p: np.ndarray, cam: CameraModel) -> Projection:
    """Project a world point to a rounded pixel and camera-frame depth.

    Points at or behind the camera plane yield pixel None with
    in_bounds False; out-of-frame points keep their pixel but are
    flagged out of bounds.
    """
    q = cam.rotation @ np.asarray(p, dtype=np.float64).reshape(3) + cam.translation
    z = float(q[2])
    if z <= 0.0:
        return Projection(None, z, False)
    u = round_half_up(cam.fx * q[0] / z + cam.cx)
    v = round_half_up(cam.fy * q[1] / z + cam.cy)
    in_bounds = 0 <= u < cam.width and 0 <= v < cam.height
    return Projection(PixelPoint(u, v), z, in_bounds)


def unproject(px: PixelPoint, depth: float, cam: CameraModel) -> np.ndarray:
    """World point of a pixel at a given camera-frame depth.

    Exact inverse of `project` up to pixel rounding.
    """
    if not np.isfinite(depth) or depth <= 0.0:
        raise ValueError("depth must be positive and finite")
    q = np.array(
        [
            depth * (px[0] - cam.cx) / cam.fx,
            depth * (px[1] - cam.cy) / cam.fy,
            depth,
        ]
    )
    return cam.rotation.T @ (q - cam.translation)


def prompt_visible(
    p: np.ndarray,
    cam: CameraModel,
    depth_image: np.ndarray,
    tol: float = DEFAULT_VISIBILITY_TOL,
) -> bool:
    """Whether a world point projects in-frame and in front of the surface.

    `depth_image` holds camera-frame depth in meters with 0 meaning no
    reading; a missing reading at the projected pixel counts as not
    visible.
    """
    depth_image = np.asarray(depth_image)
    if depth_image.shape != (cam.height, cam.width):
        raise ValueError("depth image dimensions do not match the camera")
    proj = project(p, cam)
    if not proj.in_bounds or proj.pixel is None:
        return False
    surface = float(depth_image[proj.pixel.v, proj.pixel.u])
    if surface <= DEPTH_NO_READING or not np.isfinite(surface):
        return False
    return proj.depth <= surface + tol
