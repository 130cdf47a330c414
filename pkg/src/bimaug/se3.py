"""Rigid-body transforms on SE(3) with unit-quaternion rotations.

Quaternions are stored (w, x, y, z). Translations are meters. A pose P maps
local coordinates into its parent frame: p_parent = R(P.quat) @ p_local + P.trans.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

_EPS = 1e-12


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n < _EPS:
        raise ValueError("cannot normalize near-zero quaternion")
    q = q / n
    # canonical sign: w >= 0 keeps compose/inverse roundtrips stable
    if q[0] < 0.0:
        q = -q
    return q


def quat_multiply(a, b):
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


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    n = np.linalg.norm(axis)
    if n < _EPS:
        return np.array([1.0, 0.0, 0.0, 0.0])
    axis = axis / n
    half = 0.5 * float(angle)
    s = math.sin(half)
    return np.array([math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s])


def quat_to_matrix(q):
    w, x, y, z = q
    xx, yy, zz = x * x, y * y, z * z
    xy, xz, yz = x * y, x * z, y * z
    wx, wy, wz = w * x, w * y, w * z
    return np.array(
        [
            [1 - 2 * (yy + zz), 2 * (xy - wz), 2 * (xz + wy)],
            [2 * (xy + wz), 1 - 2 * (xx + zz), 2 * (yz - wx)],
            [2 * (xz - wy), 2 * (yz + wx), 1 - 2 * (xx + yy)],
        ]
    )


def quat_from_matrix(R):
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
        )
    elif R[0, 0] > R[1, 1] and R[0, 0] > R[2, 2]:
        s = math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2]) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
        )
    elif R[1, 1] > R[2, 2]:
        s = math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2]) * 2.0
        q = np.array(
            [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
        )
    else:
        s = math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1]) * 2.0
        q = np.array(
            [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
        )
    return quat_normalize(q)


def quat_rotate(q, v):
    """Rotate 3-vector v by quaternion q (no matrix round trip)."""
    w = q[0]
    u = np.asarray(q[1:], dtype=float)
    v = np.asarray(v, dtype=float)
    uv = np.cross(u, v)
    return v + 2.0 * (w * uv + np.cross(u, uv))


def quat_to_rotvec(q):
    """Axis-angle vector (radians) of the rotation, zero-safe for identity."""
    q = np.asarray(q, dtype=float)
    if q[0] < 0.0:
        q = -q
    sin_half = np.linalg.norm(q[1:])
    angle = 2.0 * math.atan2(sin_half, q[0])
    if sin_half < _EPS:
        return np.zeros(3)
    return q[1:] * (angle / sin_half)


def rotation_angle(q):
    """Magnitude of the rotation encoded by q, in [0, pi]."""
    q = np.asarray(q, dtype=float)
    return 2.0 * math.atan2(np.linalg.norm(q[1:]), abs(q[0]))


def quat_from_rpy(roll, pitch, yaw):
    """Intrinsic x-y-z Euler angles to quaternion (R = Rz(yaw) Ry(pitch) Rx(roll))."""
    qz = quat_from_axis_angle([0, 0, 1], yaw)
    qy = quat_from_axis_angle([0, 1, 0], pitch)
    qx = quat_from_axis_angle([1, 0, 0], roll)
    return quat_normalize(quat_multiply(quat_multiply(qz, qy), qx))


def quat_to_rpy(q):
    """Inverse of quat_from_rpy; returns (roll, pitch, yaw) in radians."""
    R = quat_to_matrix(q)
    pitch = math.asin(max(-1.0, min(1.0, -R[2, 0])))
    if abs(R[2, 0]) < 1.0 - 1e-10:
        roll = math.atan2(R[2, 1], R[2, 2])
        yaw = math.atan2(R[1, 0], R[0, 0])
    else:
        # gimbal lock: put everything into roll
        roll = math.atan2(-R[1, 2], R[1, 1])
        yaw = 0.0
    return roll, pitch, yaw


@dataclass(frozen=True)
class SE3Pose:
    """Rigid transform: unit quaternion (w,x,y,z) plus translation in meters."""

    quat: np.ndarray = field(default_factory=lambda: np.array([1.0, 0.0, 0.0, 0.0]))
    trans: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        q = np.asarray(self.quat, dtype=float).reshape(4)
        t = np.asarray(self.trans, dtype=float).reshape(3)
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(t)):
            raise ValueError("non-finite pose components")
        n = np.linalg.norm(q)
        if abs(n - 1.0) > 1e-9:
            q = q / n
        if q[0] < 0.0:
            q = -q
        object.__setattr__(self, "quat", q)
        object.__setattr__(self, "trans", t)

    @staticmethod
    def identity() -> "SE3Pose":
        return SE3Pose()

    @staticmethod
    def from_axis_angle(axis, angle, trans=(0.0, 0.0, 0.0)) -> "SE3Pose":
        return SE3Pose(quat_from_axis_angle(axis, angle), np.asarray(trans, dtype=float))

    @staticmethod
    def from_rpy(roll, pitch, yaw, trans=(0.0, 0.0, 0.0)) -> "SE3Pose":
        return SE3Pose(quat_from_rpy(roll, pitch, yaw), np.asarray(trans, dtype=float))

    @staticmethod
    def from_matrix(T) -> "SE3Pose":
        T = np.asarray(T, dtype=float)
        return SE3Pose(quat_from_matrix(T[:3, :3]), T[:3, 3].copy())

    def rotation_matrix(self) -> np.ndarray:
        return quat_to_matrix(self.quat)

    def matrix(self) -> np.ndarray:
        T = np.eye(4)
        T[:3, :3] = self.rotation_matrix()
        T[:3, 3] = self.trans
        return T

    def apply(self, p) -> np.ndarray:
        """Map a point from this pose's local frame into the parent frame."""
        return quat_rotate(self.quat, p) + self.trans

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        """self ∘ other: apply `other` first in self's local frame."""
        return SE3Pose(
            quat_multiply(self.quat, other.quat),
            quat_rotate(self.quat, other.trans) + self.trans,
        )

    def inverse(self) -> "SE3Pose":
        qc = quat_conjugate(self.quat)
        return SE3Pose(qc, -quat_rotate(qc, self.trans))

    def to_dict(self) -> dict:
        return {"quat": [float(v) for v in self.quat], "trans": [float(v) for v in self.trans]}

    @staticmethod
    def from_dict(d: dict) -> "SE3Pose":
        return SE3Pose(np.asarray(d["quat"], dtype=float), np.asarray(d["trans"], dtype=float))


def compose(a: SE3Pose, b: SE3Pose) -> SE3Pose:
    return a.compose(b)


def inverse(p: SE3Pose) -> SE3Pose:
    return p.inverse()


def pose_difference(a: SE3Pose, b: SE3Pose) -> tuple[float, float]:
    """(translation distance m, rotation angle rad) between two poses."""
    dt = float(np.linalg.norm(a.trans - b.trans))
    dq = quat_multiply(quat_conjugate(a.quat), b.quat)
    return dt, rotation_angle(dq)


def perturbed_pose(src: SE3Pose, delta: SE3Pose) -> SE3Pose:
    """Target pose for an end-effector perturbation delta.

    The translation is a world-frame displacement of the pose origin and the
    rotation is composed in the source's local frame:

        target.trans = src.trans + delta.trans
        target.R     = src.R @ delta.R

    so a shared delta applied to both arms shifts both end-effectors by the
    same world vector and leaves their relative transform unchanged.
    """
    return SE3Pose(quat_multiply(src.quat, delta.quat), src.trans + np.asarray(delta.trans))
