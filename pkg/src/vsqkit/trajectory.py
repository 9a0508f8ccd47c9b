"""Waypose trajectories: densification and embodiment placement.

Sparse waypoint paths are interpolated so every consecutive step moves at
most 0.05 m and rotates at most 0.5 degrees. Positions interpolate
linearly; orientations follow the shortest great-circle arc. Quaternions
are stored (w, x, y, z).

World frame: +z up, floor at z = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

MAX_STEP_TRANSLATION = 0.05  # meters
MAX_STEP_ROTATION = math.radians(0.5)
QUAT_NORM_TOL = 1e-9
# absolute slack when converting a bound ratio to a step count, so exact
# worked cases (1 m, 10 deg) do not round up from float noise
_CEIL_EPS = 1e-12

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64).reshape(4)
    n = float(np.linalg.norm(q))
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite quaternion")
    return q / n


def quat_mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_rotate(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate a 3-vector by a unit quaternion."""
    w, x, y, z = q
    r = np.asarray(v, dtype=np.float64).reshape(3)
    uv = 2.0 * np.cross(np.array([x, y, z]), r)
    return r + w * uv + np.cross(np.array([x, y, z]), uv)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def geodesic_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Rotation angle in radians between two unit quaternions, in [0, pi].

    Uses atan2 on the relative quaternion, which stays accurate for
    small angles where arccos would lose precision.
    """
    rel = quat_mul(quat_conj(a), b)
    s = float(np.linalg.norm(rel[1:]))
    return 2.0 * math.atan2(s, abs(float(rel[0])))


def slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Shortest-arc spherical interpolation between unit quaternions."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dot = float(np.dot(a, b))
    if dot < 0.0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-12:
        out = a + t * (b - a)
        return quat_normalize(out)
    theta = math.acos(min(dot, 1.0))
    s = math.sin(theta)
    out = (math.sin((1.0 - t) * theta) / s) * a + (math.sin(t * theta) / s) * b
    return quat_normalize(out)


@dataclass
class Waypose:
    """Position (meters, world frame) plus unit orientation quaternion."""

    position: np.ndarray
    rotation: np.ndarray

    def __post_init__(self) -> None:
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        self.rotation = np.asarray(self.rotation, dtype=np.float64).reshape(4)
        if not np.isfinite(self.position).all():
            raise ValueError("waypose position must be finite")
        n = float(np.linalg.norm(self.rotation))
        if not np.isfinite(n) or abs(n - 1.0) > QUAT_NORM_TOL:
            raise ValueError(f"quaternion norm {n} is not 1 within {QUAT_NORM_TOL}")


def _step_count(distance: float, angle: float) -> int:
    n_t = math.ceil(distance / MAX_STEP_TRANSLATION - _CEIL_EPS)
    n_r = math.ceil(angle / MAX_STEP_ROTATION - _CEIL_EPS)
    return max(n_t, n_r, 1)


def densify_segment(a: Waypose, b: Waypose) -> list[Waypose]:
    """Interpolate between two wayposes so both step bounds hold.

    A single step count, the larger of the translation and rotation
    requirements, keeps position and orientation synchronized. Returns
    the n + 1 poses including both endpoints exactly.
    """
    distance = float(np.linalg.norm(b.position - a.position))
    angle = geodesic_angle(a.rotation, b.rotation)
    n = _step_count(distance, angle)
    poses = [a]
    delta = b.position - a.position
    for i in range(1, n):
        t = i / n
        poses.append(Waypose(a.position + t * delta, slerp(a.rotation, b.rotation, t)))
    poses.append(b)
    return poses


def densify_path(waypoints: list[Waypose]) -> list[Waypose]:
    """Densify consecutive waypoint pairs, deduplicating junction poses."""
    if len(waypoints) < 2:
        raise ValueError("a path needs at least two waypoints")
    out: list[Waypose] = []
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        seg = densify_segment(a, b)
        if out:
            seg = seg[1:]
        out.extend(seg)
    return out


@dataclass
class EmbodimentConfig:
    """Sensor placement and illumination parameters for one robot body.

    Illumination is validated and carried through for downstream
    renderers only; nothing here simulates it.
    """

    sensor_height: float
    offset_rotation: np.ndarray = field(default_factory=lambda: IDENTITY_QUAT.copy())
    offset_translation: np.ndarray = field(default_factory=lambda: np.zeros(3))
    illumination_type: str = "ambient"
    illumination_power_w: float | None = None

    def __post_init__(self) -> None:
        self.offset_rotation = np.asarray(self.offset_rotation, dtype=np.float64).reshape(4)
        self.offset_translation = np.asarray(
            self.offset_translation, dtype=np.float64
        ).reshape(3)
        if not np.isfinite(self.sensor_height) or self.sensor_height < 0.0:
            raise ValueError("sensor height must be non-negative")
        n = float(np.linalg.norm(self.offset_rotation))
        if abs(n - 1.0) > QUAT_NORM_TOL:
            raise ValueError("sensor offset rotation must be a unit quaternion")
        if self.illumination_type not in ("ambient", "active"):
            raise ValueError("illumination type must be 'ambient' or 'active'")
        if self.illumination_type == "active":
            if self.illumination_power_w is None or self.illumination_power_w <= 0.0:
                raise ValueError("active illumination requires a positive power")


def apply_embodiment(traj: list[Waypose], cfg: EmbodimentConfig) -> list[Waypose]:
    """Place the sensor on each pose: fix height above the floor, then
    compose the body-to-sensor offset."""
    identity_offset = np.array_equal(cfg.offset_rotation, IDENTITY_QUAT) and not np.any(
        cfg.offset_translation
    )
    out = []
    for wp in traj:
        pos = wp.position.copy()
        pos[2] = cfg.sensor_height
        if identity_offset:
            out.append(Waypose(pos, wp.rotation))
            continue
        pos = pos + quat_rotate(wp.rotation, cfg.offset_translation)
        rot = quat_normalize(quat_mul(wp.rotation, cfg.offset_rotation))
        out.append(Waypose(pos, rot))
    return out
