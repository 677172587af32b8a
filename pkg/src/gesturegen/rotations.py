"""Rotation conversions for skeletal motion data.

Euler angles follow the BVH convention: intrinsic rotations composed in the
declared channel order with pre-multiplication, ``R = R_1 @ R_2 @ R_3``.
Exponential maps encode a rotation as ``axis * angle`` (radians) with the
canonical angle in ``[0, pi]``.

All converters are vectorized over leading batch dimensions and route
through unit quaternions, which stay well-conditioned near pi and
canonicalize with a single sign flip.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidInputError

#: The six valid rotation orders (all axes distinct, as declared by BVH
#: channel lists such as ``Zrotation Xrotation Yrotation`` -> ``"ZXY"``).
ROTATION_ORDERS = ("XYZ", "XZY", "YXZ", "YZX", "ZXY", "ZYX")

#: Rotations with a smaller angle (radians) are treated as the identity to
#: avoid dividing by a near-zero magnitude.
SMALL_ANGLE = 1e-8

_AXIS_INDEX = {"X": 0, "Y": 1, "Z": 2}

# Gimbal-lock threshold on cos(middle angle).
_GIMBAL_EPS = 1e-9


def _check_order(order) -> str:
    order = "".join(order).upper()
    if order not in ROTATION_ORDERS:
        raise InvalidInputError(
            f"rotation order must be one of {ROTATION_ORDERS}, got {order!r}"
        )
    return order


def _check_finite(arr: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{what} contains non-finite values")


def _axis_quat(half_angle: np.ndarray, axis: int) -> np.ndarray:
    """Unit quaternion (w, x, y, z) for a rotation about a coordinate axis."""
    q = np.zeros(half_angle.shape + (4,), dtype=np.float64)
    q[..., 0] = np.cos(half_angle)
    q[..., 1 + axis] = np.sin(half_angle)
    return q


def quat_multiply(q1: np.ndarray, q2: np.ndarray) -> np.ndarray:
    """Hamilton product of quaternions in (w, x, y, z) convention."""
    w1, x1, y1, z1 = (q1[..., i] for i in range(4))
    w2, x2, y2, z2 = (q2[..., i] for i in range(4))
    return np.stack(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ],
        axis=-1,
    )


def euler_to_quat(angles, order, degrees: bool = False) -> np.ndarray:
    """Convert Euler angles to unit quaternions.

    Parameters
    ----------
    angles : array_like, shape (*, 3)
        Euler angles in the axis order given by ``order``.
    order : str
        One of the six orders in :data:`ROTATION_ORDERS`.
    degrees : bool
        If True, ``angles`` are in degrees.

    Returns
    -------
    q : ndarray, shape (*, 4)
        Unit quaternions (w, x, y, z) with w >= 0.
    """
    order = _check_order(order)
    angles = np.asarray(angles, dtype=np.float64)
    if angles.shape[-1] != 3:
        raise InvalidInputError(f"expected (*, 3) angles, got {angles.shape}")
    _check_finite(angles, "Euler angles")
    if degrees:
        angles = np.radians(angles)

    half = angles / 2.0
    q = _axis_quat(half[..., 0], _AXIS_INDEX[order[0]])
    q = quat_multiply(q, _axis_quat(half[..., 1], _AXIS_INDEX[order[1]]))
    q = quat_multiply(q, _axis_quat(half[..., 2], _AXIS_INDEX[order[2]]))
    return _canonicalize_quat(q)


def _canonicalize_quat(q: np.ndarray) -> np.ndarray:
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    return np.where(q[..., :1] < 0, -q, q)


def quat_to_expmap(q: np.ndarray) -> np.ndarray:
    """Convert unit quaternions to exponential maps with angle in [0, pi]."""
    q = _canonicalize_quat(np.asarray(q, dtype=np.float64))
    sin_half = np.linalg.norm(q[..., 1:], axis=-1)
    angle = 2.0 * np.arctan2(sin_half, q[..., 0])  # in [0, pi] since w >= 0
    scale = np.where(angle < SMALL_ANGLE, 0.0, angle / np.maximum(sin_half, 1e-300))
    return q[..., 1:] * scale[..., np.newaxis]


def expmap_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert exponential maps (any magnitude) to unit quaternions."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape[-1] != 3:
        raise InvalidInputError(f"expected (*, 3) exponential maps, got {m.shape}")
    _check_finite(m, "exponential map")
    angle = np.linalg.norm(m, axis=-1)
    half = angle / 2.0
    scale = np.where(angle < SMALL_ANGLE, 0.0, np.sin(half) / np.maximum(angle, 1e-300))
    q = np.concatenate(
        [np.cos(half)[..., np.newaxis], m * scale[..., np.newaxis]], axis=-1
    )
    return q


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    """Convert unit quaternions to rotation matrices, shape (*, 3, 3)."""
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    w, x, y, z = (q[..., i] for i in range(4))
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z

    R = np.empty(q.shape[:-1] + (3, 3), dtype=np.float64)
    R[..., 0, 0] = 1 - 2 * (yy + zz)
    R[..., 0, 1] = 2 * (xy - wz)
    R[..., 0, 2] = 2 * (xz + wy)
    R[..., 1, 0] = 2 * (xy + wz)
    R[..., 1, 1] = 1 - 2 * (xx + zz)
    R[..., 1, 2] = 2 * (yz - wx)
    R[..., 2, 0] = 2 * (xz - wy)
    R[..., 2, 1] = 2 * (yz + wx)
    R[..., 2, 2] = 1 - 2 * (xx + yy)
    return R


def euler_to_matrix(angles, order, degrees: bool = False) -> np.ndarray:
    """Rotation matrices for Euler angles in the given channel order."""
    return quat_to_matrix(euler_to_quat(angles, order, degrees=degrees))


def expmap_to_matrix(m) -> np.ndarray:
    """Rotation matrices for exponential-map vectors."""
    return quat_to_matrix(expmap_to_quat(m))


def _elementary_matrix(angle: float, axis: int) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    R = np.eye(3)
    i, j = (axis + 1) % 3, (axis + 2) % 3
    R[i, i] = c
    R[j, j] = c
    R[j, i] = s
    R[i, j] = -s
    return R


def matrix_to_euler(R, order, degrees: bool = False) -> np.ndarray:
    """Extract Euler angles from rotation matrices.

    Gimbal lock (middle angle at +-90 deg) is resolved by zeroing the third
    angle and folding the remaining rotation into the first.

    Parameters
    ----------
    R : array_like, shape (*, 3, 3)
    order : str
        One of :data:`ROTATION_ORDERS`.
    degrees : bool
        If True, return angles in degrees.

    Returns
    -------
    angles : ndarray, shape (*, 3)
    """
    order = _check_order(order)
    R = np.asarray(R, dtype=np.float64)
    single = R.ndim == 2
    if single:
        R = R[np.newaxis]
    batch_shape = R.shape[:-2]
    R = R.reshape(-1, 3, 3)

    i, j, k = (_AXIS_INDEX[c] for c in order)
    # +1 for cyclic (even) axis permutations, -1 otherwise.
    sign = 1.0 if (j - i) % 3 == 1 else -1.0

    sin_b = np.clip(sign * R[:, i, k], -1.0, 1.0)
    cos_b = np.hypot(R[:, i, i], R[:, i, j])
    b = np.arctan2(sin_b, cos_b)

    a = np.arctan2(-sign * R[:, j, k], R[:, k, k])
    c = np.arctan2(-sign * R[:, i, j], R[:, i, i])

    locked = np.where(cos_b < _GIMBAL_EPS)[0]
    for idx in locked:
        # Third angle zeroed; R @ R_j(b)^T is then a pure rotation about
        # axis i, from which the first angle is read off directly.
        M = R[idx] @ _elementary_matrix(b[idx], j).T
        a[idx] = np.arctan2(M[(i + 2) % 3, (i + 1) % 3], M[(i + 1) % 3, (i + 1) % 3])
        c[idx] = 0.0

    angles = np.stack([a, b, c], axis=-1).reshape(batch_shape + (3,))
    if degrees:
        angles = np.degrees(angles)
    if single:
        angles = angles[0]
    return angles


def euler_to_expmap(angles, order, degrees: bool = False) -> np.ndarray:
    """Convert Euler angles to canonical exponential maps.

    The result represents the same rotation and has magnitude in [0, pi].
    """
    return quat_to_expmap(euler_to_quat(angles, order, degrees=degrees))


def expmap_to_euler(m, order, degrees: bool = False) -> np.ndarray:
    """Convert exponential maps to Euler angles in the given order."""
    return matrix_to_euler(quat_to_matrix(expmap_to_quat(m)), order, degrees=degrees)


def expmap_continuity_fix(seq) -> np.ndarray:
    """Re-pick exponential-map representatives to remove frame-to-frame jumps.

    Every representative of a rotation with unit axis ``u`` and canonical
    angle ``theta`` lies on the line ``u * (theta + 2*pi*k)``, ``k`` integer.
    For each frame this picks the ``k`` minimizing the Euclidean distance to
    the previous (already fixed) frame, so a slow rotation drifting past pi
    keeps a continuous trajectory instead of flipping sign.

    Parameters
    ----------
    seq : array_like, shape (T, 3)
        Exponential maps, one row per frame. T >= 1.

    Returns
    -------
    fixed : ndarray, shape (T, 3)
        Same rotations; first frame unchanged.
    """
    seq = np.asarray(seq, dtype=np.float64)
    if seq.ndim != 2 or seq.shape[1] != 3:
        raise InvalidInputError(f"expected (T, 3) sequence, got {seq.shape}")
    if seq.shape[0] == 0:
        raise InvalidInputError("empty exponential-map sequence")
    _check_finite(seq, "exponential-map sequence")

    two_pi = 2.0 * np.pi
    out = seq.copy()
    for t in range(1, len(seq)):
        prev = out[t - 1]
        cur = seq[t]
        theta = np.linalg.norm(cur)
        if theta < SMALL_ANGLE:
            # Identity rotation: any u * 2*pi*k also represents it. Stay on
            # the previous frame's axis if that frame is near a full turn.
            pn = np.linalg.norm(prev)
            if pn < SMALL_ANGLE:
                continue
            u = prev / pn
            k = np.round(pn / two_pi)
            cand = u * (two_pi * k)
            if np.linalg.norm(cand - prev) < np.linalg.norm(cur - prev):
                out[t] = cand
            continue
        u = cur / theta
        k = np.round((u @ prev - theta) / two_pi)
        out[t] = u * (theta + two_pi * k)
    return out
