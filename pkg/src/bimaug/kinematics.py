"""Kinematic chains, forward kinematics, and damped least-squares inverse kinematics.

Chain convention: each revolute joint i rotates about `axis` expressed in the
frame reached so far, then advances by its `origin` link transform:

    frame_i = frame_{i-1} ∘ Rot(axis_i, q_i) ∘ origin_i,   frame_0 = base_pose

Forward kinematics therefore returns one pose per joint frame and the last
frame is the end-effector. The physical pivot of joint i sits at frame_{i-1}.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .se3 import SE3Pose, perturbed_pose, quat_conjugate, quat_multiply, quat_to_rotvec


@dataclass(frozen=True)
class Joint:
    """Revolute joint: unit rotation axis, outgoing link transform, limits [lo, hi] rad."""

    axis: np.ndarray
    origin: SE3Pose
    limits: tuple[float, float]

    def __post_init__(self):
        axis = np.asarray(self.axis, dtype=float).reshape(3)
        n = np.linalg.norm(axis)
        if abs(n - 1.0) > 1e-9:
            if n < 1e-12:
                raise ValueError("joint axis must be a nonzero vector")
            axis = axis / n
        object.__setattr__(self, "axis", axis)
        lo, hi = float(self.limits[0]), float(self.limits[1])
        if not lo < hi:
            raise ValueError(f"joint limits must satisfy lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "limits", (lo, hi))


@dataclass(frozen=True)
class KinematicChain:
    name: str
    base_pose: SE3Pose
    joints: tuple[Joint, ...]

    def __post_init__(self):
        object.__setattr__(self, "joints", tuple(self.joints))
        if not self.joints:
            raise ValueError("chain needs at least one joint")
        # cache per-joint origin matrices and axes for the FK hot path
        object.__setattr__(self, "_axes", np.stack([j.axis for j in self.joints]))
        object.__setattr__(
            self, "_origin_R", np.stack([j.origin.rotation_matrix() for j in self.joints])
        )
        object.__setattr__(self, "_origin_t", np.stack([j.origin.trans for j in self.joints]))
        object.__setattr__(self, "_lo", np.array([j.limits[0] for j in self.joints]))
        object.__setattr__(self, "_hi", np.array([j.limits[1] for j in self.joints]))

    @property
    def dof(self) -> int:
        return len(self.joints)

    @property
    def lower_limits(self) -> np.ndarray:
        return self._lo.copy()

    @property
    def upper_limits(self) -> np.ndarray:
        return self._hi.copy()

    def link_lengths(self) -> np.ndarray:
        """Declared offset between consecutive joint frames (norm of each origin)."""
        return np.array([np.linalg.norm(j.origin.trans) for j in self.joints])

    def check_q(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float).reshape(-1)
        if q.shape[0] != self.dof:
            raise ValueError(f"joint vector length {q.shape[0]} != chain DOF {self.dof}")
        if not np.all(np.isfinite(q)):
            raise ValueError("non-finite joint values")
        return q

    def within_limits(self, q, tol: float = 1e-9) -> bool:
        q = self.check_q(q)
        return bool(np.all(q >= self._lo - tol) and np.all(q <= self._hi + tol))

    def clamp(self, q) -> np.ndarray:
        return np.clip(self.check_q(q), self._lo, self._hi)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "base_pose": self.base_pose.to_dict(),
            "joints": [
                {
                    "axis": [float(v) for v in j.axis],
                    "origin": j.origin.to_dict(),
                    "limits": [j.limits[0], j.limits[1]],
                }
                for j in self.joints
            ],
        }

    @staticmethod
    def from_dict(d: dict) -> "KinematicChain":
        joints = tuple(
            Joint(
                axis=np.asarray(j["axis"], dtype=float),
                origin=SE3Pose.from_dict(j["origin"]),
                limits=(j["limits"][0], j["limits"][1]),
            )
            for j in d["joints"]
        )
        return KinematicChain(
            name=d.get("name", "arm"),
            base_pose=SE3Pose.from_dict(d["base_pose"]),
            joints=joints,
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "KinematicChain":
        with open(path) as f:
            return KinematicChain.from_dict(json.load(f))


def _axis_angle_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a unit axis."""
    x, y, z = axis
    c, s = np.cos(angle), np.sin(angle)
    t = 1.0 - c
    return np.array(
        [
            [c + x * x * t, x * y * t - z * s, x * z * t + y * s],
            [x * y * t + z * s, c + y * y * t, y * z * t - x * s],
            [x * z * t - y * s, y * z * t + x * s, c + z * z * t],
        ]
    )


def _fk_pass(chain: KinematicChain, q):
    """One FK sweep: per-frame rotation matrices/positions plus joint pivots.

    Returns (Rs, ps, pivot_ps, pivot_axes); frame i convention:
    T_i = T_{i-1} * Rot(axis_i, q_i) * origin_i with T_0 = base_pose.
    """
    q = chain.check_q(q)
    R = chain.base_pose.rotation_matrix()
    p = chain.base_pose.trans.copy()
    n = chain.dof
    Rs = np.empty((n, 3, 3))
    ps = np.empty((n, 3))
    pivot_ps = np.empty((n, 3))
    pivot_axes = np.empty((n, 3))
    for i in range(n):
        pivot_ps[i] = p
        pivot_axes[i] = R @ chain._axes[i]
        Rr = R @ _axis_angle_matrix(chain._axes[i], q[i])
        p = Rr @ chain._origin_t[i] + p
        R = Rr @ chain._origin_R[i]
        Rs[i] = R
        ps[i] = p
    return Rs, ps, pivot_ps, pivot_axes


def forward_kinematics(chain: KinematicChain, q) -> list[SE3Pose]:
    """World pose of every joint frame; the last entry is the end-effector."""
    from .se3 import quat_from_matrix

    Rs, ps, _, _ = _fk_pass(chain, q)
    return [SE3Pose(quat_from_matrix(R), p) for R, p in zip(Rs, ps)]


def fk_eef(chain: KinematicChain, q) -> SE3Pose:
    return forward_kinematics(chain, q)[-1]


def joint_pivots(chain: KinematicChain, q) -> list[tuple[np.ndarray, np.ndarray]]:
    """(world pivot position, world axis) of each joint for jacobians/rendering."""
    _, _, pivot_ps, pivot_axes = _fk_pass(chain, q)
    return [(pivot_ps[i].copy(), pivot_axes[i].copy()) for i in range(chain.dof)]


def jacobian(chain: KinematicChain, q) -> np.ndarray:
    """6xN geometric jacobian of the end-effector (rows: v_xyz then w_xyz, world frame)."""
    _, ps, pivot_ps, pivot_axes = _fk_pass(chain, q)
    J = np.empty((6, chain.dof))
    J[:3] = np.cross(pivot_axes, ps[-1][None, :] - pivot_ps).T
    J[3:] = pivot_axes.T
    return J


@dataclass
class IkConfig:
    """Levenberg-Marquardt solver settings.

    Damping adapts per iteration: grow on residual increase (step rejected),
    shrink on decrease. A solution clamped onto a joint limit still counts as
    valid when the residual tolerances are met.
    """

    pos_tol: float = 1e-4
    rot_tol: float = 1e-3
    max_iters: int = 200
    damping: float = 1e-3
    damping_grow: float = 4.0
    damping_shrink: float = 0.5

    def to_dict(self) -> dict:
        return {
            "pos_tol": self.pos_tol,
            "rot_tol": self.rot_tol,
            "max_iters": self.max_iters,
            "damping": self.damping,
        }

    @staticmethod
    def from_dict(d: dict) -> "IkConfig":
        cfg = IkConfig()
        for k, v in d.items():
            if hasattr(cfg, k):
                setattr(cfg, k, v)
        return cfg


def _pose_error(current: SE3Pose, target: SE3Pose) -> np.ndarray:
    """6-vector [position error; world-frame rotation-vector error]."""
    e = np.empty(6)
    e[:3] = target.trans - current.trans
    q_err = quat_multiply(target.quat, quat_conjugate(current.quat))
    e[3:] = quat_to_rotvec(q_err)
    return e


def _error_and_jacobian(chain, q, R_t, p_t):
    """Pose error plus geometric jacobian from a single FK sweep."""
    from .se3 import quat_from_matrix

    Rs, ps, pivot_ps, pivot_axes = _fk_pass(chain, q)
    e = np.empty(6)
    e[:3] = p_t - ps[-1]
    e[3:] = quat_to_rotvec(quat_from_matrix(R_t @ Rs[-1].T))
    J = np.empty((6, chain.dof))
    J[:3] = np.cross(pivot_axes, ps[-1][None, :] - pivot_ps).T
    J[3:] = pivot_axes.T
    return e, J


def solve_ik_lm(
    chain: KinematicChain,
    target: SE3Pose,
    seed,
    cfg: IkConfig | None = None,
):
    """Damped least-squares IK toward a full 6-DOF target pose.

    Returns the joint vector on success, or None when no configuration meeting
    the tolerances was found (infeasibility is a signal, not an error). Raises
    ValueError for malformed input.
    """
    cfg = cfg or IkConfig()
    q = chain.clamp(chain.check_q(seed))
    if not np.all(np.isfinite(target.trans)):
        raise ValueError("non-finite target pose")
    R_t = target.rotation_matrix()
    p_t = target.trans

    lam = cfg.damping
    eye6 = np.eye(6)
    err, J = _error_and_jacobian(chain, q, R_t, p_t)
    cost = float(err @ err)
    for _ in range(cfg.max_iters):
        if np.linalg.norm(err[:3]) <= cfg.pos_tol and np.linalg.norm(err[3:]) <= cfg.rot_tol:
            return q
        try:
            y = np.linalg.solve(J @ J.T + (lam * lam) * eye6, err)
        except np.linalg.LinAlgError:
            lam *= cfg.damping_grow
            continue
        q_new = chain.clamp(q + J.T @ y)
        err_new, J_new = _error_and_jacobian(chain, q_new, R_t, p_t)
        cost_new = float(err_new @ err_new)
        if cost_new < cost:
            q, err, J, cost = q_new, err_new, J_new, cost_new
            lam = max(lam * cfg.damping_shrink, 1e-9)
        else:
            lam *= cfg.damping_grow
            if lam > 1e8:
                break
    if np.linalg.norm(err[:3]) <= cfg.pos_tol and np.linalg.norm(err[3:]) <= cfg.rot_tol:
        return q
    return None


def apply_eef_perturbation(
    chain: KinematicChain,
    q_src,
    delta: SE3Pose,
    cfg: IkConfig | None = None,
):
    """Joint vector realizing the perturbed end-effector pose, seeded from q_src.

    The target is perturbed_pose(FK_eef(q_src), delta): world-frame translation
    offset, local-frame rotation offset. Returns None when IK is infeasible.
    """
    q_src = chain.check_q(q_src)
    target = perturbed_pose(fk_eef(chain, q_src), delta)
    return solve_ik_lm(chain, target, q_src, cfg)
