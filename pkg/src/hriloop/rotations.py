"""Rotation helpers: unit quaternions (w, x, y, z) and angle-axis vectors.

Quaternions are plain float64 numpy arrays of shape (4,) with scalar part
first. Angle-axis vectors are shape (3,): direction = axis, magnitude =
angle in radians.
"""

from __future__ import annotations

import numpy as np

_EPS = 1e-12

IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q: np.ndarray) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    norm = np.linalg.norm(q)
    if norm < _EPS:
        raise ValueError("cannot normalize near-zero quaternion")
    return q / norm


def quat_multiply(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    w1, x1, y1, z1 = a
    w2, x2, y2, z2 = b
    return np.array(
        [
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        ]
    )


def quat_conjugate(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_apply(q: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Rotate vector(s) v by quaternion q. v may be (3,) or (N, 3)."""
    v = np.asarray(v, dtype=np.float64)
    w, qx, qy, qz = q[0], q[1], q[2], q[3]
    if v.ndim == 1:
        # np.cross has large per-call overhead; spell it out for 3-vectors
        vx, vy, vz = v[0], v[1], v[2]
        tx = 2.0 * (qy * vz - qz * vy)
        ty = 2.0 * (qz * vx - qx * vz)
        tz = 2.0 * (qx * vy - qy * vx)
        return np.array(
            [
                vx + w * tx + (qy * tz - qz * ty),
                vy + w * ty + (qz * tx - qx * tz),
                vz + w * tz + (qx * ty - qy * tx),
            ]
        )
    xyz = q[1:]
    t = 2.0 * np.cross(xyz, v)
    return v + w * t + np.cross(xyz, t)


def quat_to_matrix(q: np.ndarray) -> np.ndarray:
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(m: np.ndarray) -> np.ndarray:
    """Convert a rotation matrix to a unit quaternion (w >= 0)."""
    m = np.asarray(m, dtype=np.float64)
    tr = np.trace(m)
    if tr > 0:
        s = np.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (m[2, 1] - m[1, 2]) / s, (m[0, 2] - m[2, 0]) / s, (m[1, 0] - m[0, 1]) / s]
        )
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = np.sqrt(max(m[i, i] - m[j, j] - m[k, k] + 1.0, 0.0)) * 2.0
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    q = quat_normalize(q)
    return -q if q[0] < 0 else q


def angle_axis_to_quat(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    angle = np.linalg.norm(v)
    if angle < _EPS:
        return IDENTITY_QUAT.copy()
    axis = v / angle
    half = angle / 2.0
    return np.concatenate([[np.cos(half)], np.sin(half) * axis])


def quat_to_angle_axis(q: np.ndarray) -> np.ndarray:
    """Inverse of angle_axis_to_quat; result has magnitude in [0, pi]."""
    q = quat_normalize(q)
    if q[0] < 0:
        q = -q
    angle = 2.0 * np.arccos(np.clip(q[0], -1.0, 1.0))
    s = np.linalg.norm(q[1:])
    if s < _EPS:
        return np.zeros(3)
    return (q[1:] / s) * angle


def angle_axis_to_matrix(v: np.ndarray) -> np.ndarray:
    """Rodrigues' formula."""
    v = np.asarray(v, dtype=np.float64)
    angle = np.linalg.norm(v)
    if angle < _EPS:
        return np.eye(3)
    axis = v / angle
    kx, ky, kz = axis
    k = np.array([[0, -kz, ky], [kz, 0, -kx], [-ky, kx, 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


def canonicalize_angle_axis(v: np.ndarray) -> np.ndarray:
    """Map an angle-axis vector to the equivalent one with magnitude in [0, pi].

    A rotation of (2*pi - theta) about axis a equals theta about -a; angles
    are first reduced modulo 2*pi. Zero maps to zero.
    """
    v = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(v)):
        raise ValueError("angle-axis vector must be finite")
    angle = np.linalg.norm(v)
    if angle < _EPS:
        return np.zeros(3)
    axis = v / angle
    angle = np.fmod(angle, 2.0 * np.pi)
    if angle < 0:
        angle += 2.0 * np.pi
    if angle > np.pi:
        angle = 2.0 * np.pi - angle
        axis = -axis
    return axis * angle


def quat_geodesic_angle(a: np.ndarray, b: np.ndarray) -> float:
    """Geodesic angle in radians between two unit quaternions."""
    d = abs(float(np.dot(quat_normalize(a), quat_normalize(b))))
    return 2.0 * float(np.arccos(np.clip(d, -1.0, 1.0)))


def quat_slerp(a: np.ndarray, b: np.ndarray, t: float) -> np.ndarray:
    """Spherical linear interpolation along the shorter arc."""
    a = quat_normalize(a)
    b = quat_normalize(b)
    dot = float(np.dot(a, b))
    if dot < 0:
        b = -b
        dot = -dot
    if dot > 1.0 - 1e-10:
        return quat_normalize(a + t * (b - a))
    theta = np.arccos(np.clip(dot, -1.0, 1.0))
    sin_theta = np.sin(theta)
    return quat_normalize(
        (np.sin((1.0 - t) * theta) / sin_theta) * a + (np.sin(t * theta) / sin_theta) * b
    )
