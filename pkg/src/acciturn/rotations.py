"""SO(3) helpers on plain numpy arrays.

Rotations are ``(3, 3)`` float arrays; most functions also accept a leading
batch axis ``(N, 3, 3)``. Euler poses follow ``R = Rz(roll) @ Rx(elevation) @
Ry(azimuth)``, so azimuth is a turn about the vertical (y) axis applied first.
"""

from typing import NamedTuple

import numpy as np

from .errors import DegenerateSixD, ZeroQuaternion

EPS_GS = 1e-8
GIMBAL_TOL = 1e-7
QUAT_NORM_WINDOW = 1e-3
TWO_PI = 2.0 * np.pi


class EulerPose(NamedTuple):
    azimuth: float
    elevation: float
    roll: float


def wrap_angle(theta):
    """Wrap angles into ``[-pi, pi)``."""
    out = np.mod(np.asarray(theta, dtype=float) + np.pi, TWO_PI) - np.pi
    # mod can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= np.pi, out - TWO_PI, out)
    return out if out.ndim else float(out)


def rot_x(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def axis_angle_to_rotation(axis, angle):
    """Rodrigues' formula. ``axis`` (..., 3) need not be unit length."""
    axis = np.asarray(axis, dtype=float)
    angle = np.asarray(angle, dtype=float)
    k = axis / np.linalg.norm(axis, axis=-1, keepdims=True)
    x, y, z = k[..., 0], k[..., 1], k[..., 2]
    zero = np.zeros_like(x)
    K = np.stack(
        [np.stack([zero, -z, y], -1), np.stack([z, zero, -x], -1), np.stack([-y, x, zero], -1)],
        axis=-2,
    )
    s = np.sin(angle)[..., None, None]
    c = np.cos(angle)[..., None, None]
    return np.eye(3) + s * K + (1.0 - c) * (K @ K)


def is_rotation(R, tol=1e-9):
    R = np.asarray(R, dtype=float)
    if R.shape[-2:] != (3, 3) or not np.all(np.isfinite(R)):
        return False
    eye_dev = np.abs(np.swapaxes(R, -1, -2) @ R - np.eye(3)).max()
    det_dev = np.abs(np.linalg.det(R) - 1.0).max()
    return bool(eye_dev <= tol and det_dev <= tol)


def _normalize_checked(v, what):
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    if np.any(n <= EPS_GS):
        raise DegenerateSixD(f"{what} has norm <= {EPS_GS:g}")
    return v / n


def sixd_to_rotation(v):
    """Map 6D vectors ``(a1, a2)`` to rotations by Gram-Schmidt.

    The result has columns ``b1 = a1/|a1|``, ``b2`` the normalized part of
    ``a2`` orthogonal to ``b1``, and ``b3 = b1 x b2``. Accepts ``(6,)`` or
    ``(N, 6)``.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != 6:
        raise ValueError(f"expected trailing dimension 6, got {v.shape}")
    a1, a2 = v[..., :3], v[..., 3:]
    b1 = _normalize_checked(a1, "first 6D column")
    u = a2 - np.sum(a2 * b1, axis=-1, keepdims=True) * b1
    b2 = _normalize_checked(u, "orthogonal part of second 6D column")
    b3 = np.cross(b1, b2)
    return np.stack([b1, b2, b3], axis=-1)


def rotation_to_sixd(R):
    R = np.asarray(R, dtype=float)
    return np.concatenate([R[..., :, 0], R[..., :, 1]], axis=-1)


def _angle_of(M):
    # rotation angle of M via atan2(sin, cos): accurate near 0 and pi, unlike arccos
    M = np.asarray(M, dtype=float)
    cos = (np.trace(M, axis1=-2, axis2=-1) - 1.0) / 2.0
    skew = np.stack(
        [M[..., 2, 1] - M[..., 1, 2], M[..., 0, 2] - M[..., 2, 0], M[..., 1, 0] - M[..., 0, 1]],
        axis=-1,
    )
    sin = np.linalg.norm(skew, axis=-1) / 2.0
    return np.arctan2(sin, np.clip(cos, -1.0, 1.0))


def rotation_angle(R):
    """Angle of ``R`` about its axis, in ``[0, pi]``."""
    out = _angle_of(R)
    return out if np.ndim(out) else float(out)


def geodesic_distance(R, S):
    """Geodesic distance ``|log(R^T S)|_F / sqrt(2)`` in radians, batched."""
    R = np.asarray(R, dtype=float)
    S = np.asarray(S, dtype=float)
    return rotation_angle(np.swapaxes(R, -1, -2) @ S)


def chordal_distance_sq(R, S):
    d = np.asarray(R, dtype=float) - np.asarray(S, dtype=float)
    out = np.sum(d * d, axis=(-2, -1))
    return out if np.ndim(out) else float(out)


def relative_rotation(R_i, R_j):
    """``R_i @ R_j^T``: the rotation carrying frame j's pose to frame i's."""
    return np.asarray(R_i, dtype=float) @ np.swapaxes(np.asarray(R_j, dtype=float), -1, -2)


def euler_to_rotation(pose):
    """Rotation for an ``EulerPose`` (or ``(azimuth, elevation, roll)`` tuple)."""
    azimuth, elevation, roll = pose
    return rot_z(roll) @ rot_x(elevation) @ rot_y(azimuth)


def rotation_to_euler(R):
    """Inverse of :func:`euler_to_rotation`.

    Within ``GIMBAL_TOL`` of elevation +-pi/2, roll is set to 0 and the
    coupled azimuth+roll is reported as azimuth.
    """
    R = np.asarray(R, dtype=float)
    cos_el = np.hypot(R[0, 1], R[1, 1])
    elevation = float(np.arctan2(R[2, 1], cos_el))
    if np.pi / 2 - abs(elevation) < GIMBAL_TOL:
        elevation = float(np.copysign(np.pi / 2, elevation))
        # R = Rx(+-pi/2) @ Ry(a): row 0 is (cos a, 0, sin a)
        azimuth = np.arctan2(R[0, 2], R[0, 0])
        roll = 0.0
    else:
        azimuth = np.arctan2(-R[2, 0], R[2, 2])
        roll = np.arctan2(-R[0, 1], R[1, 1])
    return EulerPose(wrap_angle(azimuth), elevation, wrap_angle(roll))


def quaternion_to_rotation(q):
    """Hamilton ``(w, x, y, z)`` quaternion to rotation, normalizing first."""
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q, axis=-1, keepdims=True)
    if np.any(n < 1e-6):
        raise ZeroQuaternion("quaternion norm below 1e-6")
    w, x, y, z = np.moveaxis(q / n, -1, 0)
    return np.stack(
        [
            np.stack([1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)], -1),
            np.stack([2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)], -1),
            np.stack([2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)], -1),
        ],
        axis=-2,
    )


def rotation_to_quaternion(R):
    """Unit quaternion ``(w, x, y, z)`` with ``w >= 0`` for a single rotation."""
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    # Shepperd's method: branch on the largest diagonal term
    if tr > 0:
        s = 2.0 * np.sqrt(tr + 1.0)
        q = np.array([0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s])
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = np.array([(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s])
    elif R[1, 1] > R[2, 2]:
        s = 2.0 * np.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = np.array([(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s])
    else:
        s = 2.0 * np.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = np.array([(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s])
    q /= np.linalg.norm(q)
    return -q if q[0] < 0 else q


def random_rotation(rng, size=None):
    """Haar-uniform rotation(s) from a normalized 4-Gaussian quaternion."""
    shape = (4,) if size is None else (size, 4)
    q = rng.standard_normal(shape)
    return quaternion_to_rotation(q)


def small_random_rotation(sigma, rng, size=None):
    """Rotation about a uniform axis by an angle drawn from ``|N(0, sigma^2)|``."""
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    n = 1 if size is None else size
    axis = rng.standard_normal((n, 3))
    angle = np.abs(rng.standard_normal(n)) * sigma
    R = axis_angle_to_rotation(axis, angle)
    return R[0] if size is None else R
