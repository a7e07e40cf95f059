import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats
from scipy.spatial.transform import Rotation as SciRot

from acciturn.errors import DegenerateSixD, ZeroQuaternion
from acciturn.rotations import (
    EulerPose,
    chordal_distance_sq,
    euler_to_rotation,
    geodesic_distance,
    is_rotation,
    quaternion_to_rotation,
    random_rotation,
    relative_rotation,
    rot_x,
    rot_y,
    rot_z,
    rotation_to_euler,
    rotation_to_quaternion,
    rotation_to_sixd,
    sixd_to_rotation,
    small_random_rotation,
    wrap_angle,
)

from .conftest import rodrigues_oracle, rotations, trace_angle

E1, E2, E3 = np.eye(3)


# -- 6D ---------------------------------------------------------------------------


def test_sixd_identity():
    np.testing.assert_array_equal(sixd_to_rotation(np.r_[E1, E2]), np.eye(3))


def test_sixd_gram_schmidt_removes_component():
    np.testing.assert_allclose(sixd_to_rotation(np.r_[2 * E1, E1 + E2]), np.eye(3), atol=1e-15)


@pytest.mark.parametrize("v", [np.r_[E1, 3 * E1], np.r_[np.zeros(3), E2], np.r_[E1, 1e-9 * E2]])
def test_sixd_degenerate(v):
    with pytest.raises(DegenerateSixD):
        sixd_to_rotation(v)


def test_sixd_batch_rejects_any_degenerate(rng):
    v = rng.standard_normal((5, 6))
    v[3, 3:] = 2 * v[3, :3]
    with pytest.raises(DegenerateSixD):
        sixd_to_rotation(v)


def test_rotation_to_sixd_identity():
    np.testing.assert_array_equal(rotation_to_sixd(np.eye(3)), np.r_[E1, E2])


def test_rotation_to_sixd_rz():
    # Rz(pi/3) from the axis-angle oracle; its first two columns
    R = rodrigues_oracle(E3, np.pi / 3)
    c, s = 0.5, np.sqrt(3) / 2
    np.testing.assert_allclose(rotation_to_sixd(R), [c, s, 0, -s, c, 0], atol=1e-15)


def test_sixd_round_trip(rng):
    R = random_rotation(rng, 1000)
    back = sixd_to_rotation(rotation_to_sixd(R))
    assert np.abs(back - R).max() < 1e-9


@given(st.lists(st.floats(-10, 10, allow_nan=False), min_size=6, max_size=6))
def test_sixd_output_is_rotation(v):
    v = np.array(v)
    a1, a2 = v[:3], v[3:]
    if np.linalg.norm(a1) <= 1e-3 or np.linalg.norm(np.cross(a1, a2)) <= 1e-3 * np.linalg.norm(a1):
        return
    assert is_rotation(sixd_to_rotation(v), 1e-9)


# -- distances ----------------------------------------------------------------


def test_geodesic_examples(rng):
    R = random_rotation(rng)
    assert geodesic_distance(R, R) < 1e-12
    axis = rng.standard_normal(3)
    assert geodesic_distance(np.eye(3), rodrigues_oracle(axis, np.pi / 6)) == pytest.approx(np.pi / 6, abs=1e-12)
    assert geodesic_distance(np.eye(3), rot_z(np.pi)) == pytest.approx(np.pi, abs=1e-12)


def test_geodesic_matches_log_norm(rng):
    from scipy.linalg import logm

    for _ in range(20):
        R, S = random_rotation(rng), random_rotation(rng)
        ref = np.linalg.norm(logm(R.T @ S), "fro") / np.sqrt(2)
        assert geodesic_distance(R, S) == pytest.approx(float(np.real(ref)), abs=1e-8)


def test_geodesic_small_angles_accurate():
    # arccos loses precision here; the library must not
    for angle in (1e-6, 1e-9, 1e-12):
        assert geodesic_distance(np.eye(3), rot_x(angle)) == pytest.approx(angle, rel=1e-6)


@settings(max_examples=200)
@given(rotations(), rotations(), rotations())
def test_geodesic_metric_properties(R, S, Q):
    d = geodesic_distance(R, S)
    assert 0 <= d <= np.pi
    assert d == pytest.approx(geodesic_distance(S, R), abs=1e-9)
    assert geodesic_distance(Q @ R, Q @ S) == pytest.approx(d, abs=1e-9)
    assert geodesic_distance(R @ Q, S @ Q) == pytest.approx(d, abs=1e-9)
    assert d <= geodesic_distance(R, Q) + geodesic_distance(Q, S) + 1e-9


def test_chordal_examples(rng):
    R = random_rotation(rng)
    assert chordal_distance_sq(R, R) == 0
    assert chordal_distance_sq(np.eye(3), rot_z(np.pi)) == pytest.approx(8.0, abs=1e-12)
    S = random_rotation(rng, 50)
    np.testing.assert_allclose(chordal_distance_sq(R, S), chordal_distance_sq(S, R))


@given(rotations(), rotations())
def test_chordal_geodesic_consistency(R, S):
    d = geodesic_distance(R, S)
    assert chordal_distance_sq(R, S) == pytest.approx(6 - 2 * (1 + 2 * np.cos(d)), abs=1e-9)


# -- relative rotations ---------------------------------------------------------


def test_relative_rotation(rng):
    R = random_rotation(rng)
    np.testing.assert_allclose(relative_rotation(R, R), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(relative_rotation(rot_z(np.pi / 2), rot_z(np.pi / 4)), rot_z(np.pi / 4), atol=1e-15)


@given(rotations(), rotations(), rotations())
def test_relative_rotation_right_gauge(Ri, Rj, Q):
    np.testing.assert_allclose(relative_rotation(Ri @ Q, Rj @ Q), relative_rotation(Ri, Rj), atol=1e-12)


# -- Euler --------------------------------------------------------------------


def test_euler_examples():
    np.testing.assert_array_equal(euler_to_rotation((0, 0, 0)), np.eye(3))
    np.testing.assert_allclose(euler_to_rotation((np.pi / 2, 0, 0)), rot_y(np.pi / 2), atol=1e-16)
    assert rotation_to_euler(np.eye(3)) == (0.0, 0.0, 0.0)
    az, el, ro = rotation_to_euler(rot_y(1.0))
    assert (az, el, ro) == pytest.approx((1.0, 0.0, 0.0), abs=1e-15)


def test_euler_composition_order():
    a, b, g = 0.3, -0.2, 0.7
    ref = SciRot.from_euler("ZXY", [g, b, a]).as_matrix()  # intrinsic Z, X, Y == Rz Rx Ry
    np.testing.assert_allclose(euler_to_rotation((a, b, g)), ref, atol=1e-15)


def test_euler_round_trip(rng):
    n = 1000
    poses = np.stack(
        [rng.uniform(-np.pi, np.pi, n), rng.uniform(-np.pi / 2 + 0.05, np.pi / 2 - 0.05, n), rng.uniform(-np.pi, np.pi, n)],
        axis=1,
    )
    worst = 0.0
    for p in poses:
        back = rotation_to_euler(euler_to_rotation(p))
        worst = max(worst, geodesic_distance(euler_to_rotation(back), euler_to_rotation(p)))
        assert -np.pi <= back.azimuth < np.pi and -np.pi <= back.roll < np.pi
    assert worst < 1e-9


def test_gimbal_lock_convention():
    pose = rotation_to_euler(rot_x(np.pi / 2))
    assert pose.elevation == np.pi / 2
    assert pose.roll == 0.0
    assert pose.azimuth == pytest.approx(0.0, abs=1e-12)
    # azimuth and roll are coupled at the lock; the decomposition still reproduces R
    R = euler_to_rotation((0.4, -np.pi / 2, 0.9))
    p = rotation_to_euler(R)
    assert p.roll == 0.0 and p.elevation == -np.pi / 2
    assert geodesic_distance(euler_to_rotation(p), R) < 1e-9


def test_wrap_angle():
    assert wrap_angle(np.pi) == -np.pi
    assert wrap_angle(-np.pi) == -np.pi
    assert wrap_angle(3 * np.pi / 2) == pytest.approx(-np.pi / 2)
    assert isinstance(wrap_angle(0.1), float)


# -- quaternions ------------------------------------------------------------------


def test_quaternion_examples():
    np.testing.assert_array_equal(quaternion_to_rotation([1, 0, 0, 0]), np.eye(3))
    q = [np.cos(np.pi / 8), 0, 0, np.sin(np.pi / 8)]
    np.testing.assert_allclose(quaternion_to_rotation(q), rot_z(np.pi / 4), atol=1e-15)
    with pytest.raises(ZeroQuaternion):
        quaternion_to_rotation([0, 0, 0, 1e-8])


def test_quaternion_vs_axis_angle_oracle(rng):
    for _ in range(200):
        axis = rng.standard_normal(3)
        axis /= np.linalg.norm(axis)
        angle = rng.uniform(0, np.pi)
        q = np.r_[np.cos(angle / 2), np.sin(angle / 2) * axis]
        assert trace_angle(quaternion_to_rotation(q), rodrigues_oracle(axis, angle)) < 1e-7
        assert geodesic_distance(quaternion_to_rotation(q), rodrigues_oracle(axis, angle)) < 1e-12


def test_quaternion_matches_scipy(rng):
    q = rng.standard_normal((100, 4))
    ref = SciRot.from_quat(q[:, [1, 2, 3, 0]]).as_matrix()
    np.testing.assert_allclose(quaternion_to_rotation(q), ref, atol=1e-14)


def test_rotation_to_quaternion_round_trip(rng):
    for R in random_rotation(rng, 300):
        q = rotation_to_quaternion(R)
        assert q[0] >= 0 and np.linalg.norm(q) == pytest.approx(1.0)
        assert np.abs(quaternion_to_rotation(q) - R).max() < 1e-14
    # near-pi rotations exercise the non-trace branches
    for R in (rot_x(np.pi), rot_y(np.pi - 1e-9), rot_z(np.pi)):
        assert np.abs(quaternion_to_rotation(rotation_to_quaternion(R)) - R).max() < 1e-14


# -- sampling -------------------------------------------------------------------


def test_random_rotation_valid(rng):
    assert is_rotation(random_rotation(rng, 1000))
    assert is_rotation(random_rotation(rng))


def test_haar_trace_mean(rng):
    tr = np.trace(random_rotation(rng, 100_000), axis1=1, axis2=2)
    assert abs(tr.mean()) < 0.02


def test_haar_angle_distribution(rng):
    angles = geodesic_distance(np.eye(3), random_rotation(rng, 20_000))
    # density (1 - cos t)/pi on [0, pi]
    res = stats.kstest(angles, lambda t: (t - np.sin(t)) / np.pi)
    assert res.pvalue > 1e-3


def test_small_random_rotation(rng):
    assert np.array_equal(small_random_rotation(0.0, rng), np.eye(3))
    R = small_random_rotation(0.1, rng, size=100_000)
    assert is_rotation(R)
    mean = geodesic_distance(np.eye(3), R).mean()
    assert mean == pytest.approx(0.1 * np.sqrt(2 / np.pi), rel=0.03)
    with pytest.raises(ValueError):
        small_random_rotation(-1.0, rng)


def test_euler_pose_is_tuple():
    p = EulerPose(0.1, 0.2, 0.3)
    assert tuple(p) == (0.1, 0.2, 0.3)
