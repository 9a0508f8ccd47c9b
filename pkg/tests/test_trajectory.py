import math

import numpy as np
import pytest

from vsqkit.trajectory import (
    MAX_STEP_ROTATION,
    MAX_STEP_TRANSLATION,
    EmbodimentConfig,
    Waypose,
    apply_embodiment,
    densify_path,
    densify_segment,
    geodesic_angle,
    quat_mul,
    quat_rotate,
    quat_to_matrix,
    slerp,
)


def yaw_quat(degrees):
    half = math.radians(degrees) / 2.0
    return np.array([math.cos(half), 0.0, 0.0, math.sin(half)])


def random_unit_quat(rng):
    q = rng.normal(size=4)
    return q / np.linalg.norm(q)


IDENT = np.array([1.0, 0.0, 0.0, 0.0])


def test_waypose_validates_quaternion():
    with pytest.raises(ValueError):
        Waypose([0, 0, 0], [1.0, 0.0, 0.0, 1e-4])
    with pytest.raises(ValueError):
        Waypose([0, 0, 0], [0.9, 0.0, 0.0, 0.0])
    with pytest.raises(ValueError):
        Waypose([np.inf, 0, 0], IDENT)


def test_degenerate_segment():
    a = Waypose([1, 2, 3], IDENT)
    out = densify_segment(a, Waypose([1, 2, 3], IDENT))
    assert len(out) == 2
    assert np.array_equal(out[0].position, a.position)
    assert np.array_equal(out[1].position, a.position)


def test_one_meter_translation_gives_20_steps():
    a = Waypose([0, 0, 0], IDENT)
    b = Waypose([1, 0, 0], IDENT)
    out = densify_segment(a, b)
    assert len(out) == 21
    steps = [np.linalg.norm(q.position - p.position) for p, q in zip(out, out[1:])]
    assert all(s <= MAX_STEP_TRANSLATION + 1e-12 for s in steps)
    assert steps[0] == pytest.approx(0.05)


def test_ten_degree_rotation_gives_20_steps():
    a = Waypose([0, 0, 0], IDENT)
    b = Waypose([0, 0, 0], yaw_quat(10.0))
    out = densify_segment(a, b)
    assert len(out) == 21
    angles = [geodesic_angle(p.rotation, q.rotation) for p, q in zip(out, out[1:])]
    assert all(a_ <= MAX_STEP_ROTATION + math.radians(1e-9) for a_ in angles)
    assert angles[0] == pytest.approx(math.radians(0.5), abs=1e-12)


def test_endpoints_preserved_exactly():
    rng = np.random.default_rng(50)
    a = Waypose(rng.normal(size=3), random_unit_quat(rng))
    b = Waypose(rng.normal(size=3), random_unit_quat(rng))
    out = densify_segment(a, b)
    assert np.array_equal(out[0].position, a.position)
    assert np.array_equal(out[0].rotation, a.rotation)
    assert np.array_equal(out[-1].position, b.position)
    assert np.array_equal(out[-1].rotation, b.rotation)


def test_collinear_path_dedupes_junctions():
    points = [Waypose([i, 0, 0], IDENT) for i in range(3)]
    out = densify_path(points)
    assert len(out) == 41  # 21 + 21 - 1


def test_square_path_bounds_hold_at_corners():
    corners = [
        Waypose([0, 0, 0], yaw_quat(0)),
        Waypose([0.3, 0, 0], yaw_quat(90)),
        Waypose([0.3, 0.3, 0], yaw_quat(180)),
        Waypose([0, 0.3, 0], yaw_quat(270)),
        Waypose([0, 0, 0], yaw_quat(0)),
    ]
    out = densify_path(corners)
    for p, q in zip(out, out[1:]):
        assert np.linalg.norm(q.position - p.position) <= MAX_STEP_TRANSLATION + 1e-12
        assert geodesic_angle(p.rotation, q.rotation) <= MAX_STEP_ROTATION + math.radians(1e-9)


def test_random_pairs_satisfy_bounds():
    rng = np.random.default_rng(51)
    for _ in range(300):
        a = Waypose(rng.uniform(-1.5, 1.5, size=3), random_unit_quat(rng))
        b = Waypose(rng.uniform(-1.5, 1.5, size=3), random_unit_quat(rng))
        out = densify_segment(a, b)
        for p, q in zip(out, out[1:]):
            assert np.linalg.norm(q.position - p.position) <= MAX_STEP_TRANSLATION + 1e-12
            assert geodesic_angle(p.rotation, q.rotation) <= MAX_STEP_ROTATION + math.radians(1e-9)
        for p in out:
            assert abs(np.linalg.norm(p.rotation) - 1.0) <= 1e-9


def test_reversal_symmetry():
    rng = np.random.default_rng(52)
    for _ in range(50):
        pts = [Waypose(rng.uniform(-1, 1, size=3), random_unit_quat(rng)) for _ in range(3)]
        fwd = densify_path(pts)
        rev = densify_path(pts[::-1])
        assert len(fwd) == len(rev)
        for p, q in zip(fwd, rev[::-1]):
            assert np.allclose(p.position, q.position, atol=1e-9)
            # antipodal quaternions encode the same rotation
            assert min(
                np.abs(p.rotation - q.rotation).max(),
                np.abs(p.rotation + q.rotation).max(),
            ) <= 1e-9


def test_path_requires_two_waypoints():
    with pytest.raises(ValueError):
        densify_path([Waypose([0, 0, 0], IDENT)])


def test_slerp_shortest_arc():
    a = yaw_quat(0)
    b = -yaw_quat(10)  # antipodal representation of the same target
    mid = slerp(a, b, 0.5)
    assert geodesic_angle(a, mid) == pytest.approx(math.radians(5), abs=1e-9)


def test_embodiment_height_placement():
    traj = [Waypose([1.0, 2.0, 0.7], yaw_quat(30)), Waypose([0.0, -1.0, 0.2], yaw_quat(60))]
    for height in (1.0, 0.1):
        placed = apply_embodiment(traj, EmbodimentConfig(sensor_height=height))
        assert all(p.position[2] == height for p in placed)
        assert all(np.array_equal(p.rotation, t.rotation) for p, t in zip(placed, traj))


def test_embodiment_identity_is_exact():
    traj = [Waypose([1.0, 2.0, 0.5], yaw_quat(45))]
    placed = apply_embodiment(traj, EmbodimentConfig(sensor_height=0.5))
    assert np.array_equal(placed[0].position, traj[0].position)
    assert np.array_equal(placed[0].rotation, traj[0].rotation)


def test_embodiment_offset_composes():
    traj = [Waypose([0.0, 0.0, 0.0], yaw_quat(90))]
    cfg = EmbodimentConfig(
        sensor_height=1.0,
        offset_rotation=yaw_quat(10),
        offset_translation=np.array([0.2, 0.0, 0.0]),
    )
    placed = apply_embodiment(traj, cfg)
    expected_pos = np.array([0.0, 0.0, 1.0]) + quat_rotate(yaw_quat(90), [0.2, 0.0, 0.0])
    assert np.allclose(placed[0].position, expected_pos, atol=1e-12)
    expected_rot = quat_mul(yaw_quat(90), yaw_quat(10))
    assert np.allclose(placed[0].rotation, expected_rot, atol=1e-9)


def test_embodiment_config_validation():
    with pytest.raises(ValueError):
        EmbodimentConfig(sensor_height=-0.1)
    with pytest.raises(ValueError):
        EmbodimentConfig(sensor_height=1.0, offset_rotation=[1, 0, 0, 0.1])
    with pytest.raises(ValueError):
        EmbodimentConfig(sensor_height=1.0, illumination_type="laser")
    with pytest.raises(ValueError):
        EmbodimentConfig(sensor_height=1.0, illumination_type="active")
    cfg = EmbodimentConfig(sensor_height=1.0, illumination_type="active", illumination_power_w=5.0)
    assert cfg.illumination_power_w == 5.0


def test_quat_to_matrix_rotates_like_quat():
    rng = np.random.default_rng(53)
    for _ in range(100):
        q = random_unit_quat(rng)
        v = rng.normal(size=3)
        assert np.allclose(quat_to_matrix(q) @ v, quat_rotate(q, v), atol=1e-12)
