"""Synthetic two-arm dataset generation for demos and verification.

Builds a pair of 6-DOF arms on a table, smooth joint trajectories, torque
traces with optional injected contact steps, and source images rendered with
the same camera used downstream, so skeleton/source alignment is exact by
construction, as in a calibrated real capture.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .camera import CameraModel, look_at_extrinsics
from .episode import Episode, Frame, save_episode
from .kinematics import Joint, KinematicChain
from .pipeline import SkeletonRenderer
from .renderer import StyleConfig
from .sampler import ARMS, LEFT, RIGHT
from .se3 import SE3Pose

SYNTH_DEPTH_RANGE = (0.3, 3.0)

# mirrored home poses: both arms reach forward over the table
_HOME = {
    "left": np.array([1.26, 0.1, 1.29, -0.36, 0.28, 0.54]),
    "right": np.array([-1.26, -0.1, -1.29, 0.36, -0.28, -0.54]),
}


def default_chain(name: str, base_x: float) -> KinematicChain:
    """6-DOF arm: shoulder yaw/pitch, elbow, wrist pitch/yaw/pitch."""
    axes = [(0, 0, 1), (0, 1, 0), (0, 1, 0), (0, 1, 0), (0, 0, 1), (0, 1, 0)]
    links = [0.16, 0.26, 0.22, 0.12, 0.10, 0.09]
    joints = tuple(
        Joint(
            axis=np.array(a, dtype=float),
            origin=SE3Pose(trans=np.array([0.0, 0.0, L])),
            limits=(-2.9, 2.9),
        )
        for a, L in zip(axes, links)
    )
    return KinematicChain(name=name, base_pose=SE3Pose(trans=np.array([base_x, 0.0, 0.0])), joints=joints)


def default_chains() -> dict[str, KinematicChain]:
    return {LEFT: default_chain("left", -0.32), RIGHT: default_chain("right", 0.32)}


def default_camera(width: int = 128, height: int = 128, index: int = 0) -> CameraModel:
    """Third-person cameras on an arc in front of the workspace."""
    angle = math.radians(-21.0 + 14.0 * index)
    eye = (1.35 * math.sin(angle), 0.25 - 1.35 * math.cos(angle), 0.80)
    ext = look_at_extrinsics(eye, (0.0, 0.22, 0.34))
    f = 0.85 * width
    return CameraModel(
        fx=f, fy=f, cx=(width - 1) / 2.0, cy=(height - 1) / 2.0,
        width=width, height=height, extrinsics=ext,
    )


def joint_trajectory(chain: KinematicChain, length: int, rng: np.random.Generator) -> np.ndarray:
    """Smooth in-limit trajectory around the arm's home configuration, (T, dof)."""
    home = _HOME.get(chain.name, _HOME["left"])
    phases = rng.uniform(0, 2 * np.pi, size=chain.dof)
    cycles = rng.uniform(0.6, 1.4)
    amp = rng.uniform(0.05, 0.16, size=chain.dof)
    t = np.arange(length)[:, None] / max(length - 1, 1)
    q = home[None, :] + amp[None, :] * np.sin(2 * np.pi * cycles * t + phases[None, :])
    return np.clip(q, chain.lower_limits + 0.05, chain.upper_limits - 0.05)


def torque_trace(
    dof: int, length: int, rng: np.random.Generator, steps: list[tuple[int, int, float]] | None = None
) -> np.ndarray:
    """Smooth baseline torque with optional (start, duration, magnitude) contact bursts.

    Contact torque is irregular, so the burst carries per-step jitter the AR
    model cannot absorb; a constant offset would only spike the residual at
    its edges."""
    t = np.arange(length)[:, None]
    base = 0.4 * np.sin(2 * np.pi * t / max(length, 1) + np.arange(dof)[None, :])
    trace = base + rng.normal(scale=0.02, size=(length, dof))
    for start, duration, magnitude in steps or []:
        burst = magnitude + rng.normal(scale=0.5 * magnitude, size=(duration, min(3, dof)))
        trace[start : start + duration, : min(3, dof)] += burst
    return trace


def make_episode(
    name: str,
    chains: dict[str, KinematicChain],
    cameras: list[CameraModel],
    length: int,
    rng: np.random.Generator,
    contact_steps: dict[str, list[tuple[int, int, float]]] | None = None,
    with_depth: bool = False,
    style: StyleConfig | None = None,
) -> Episode:
    renderer = SkeletonRenderer(chains, style)
    traj = {arm: joint_trajectory(chains[arm], length, rng) for arm in ARMS}
    torques = {
        arm: torque_trace(chains[arm].dof, length, rng, (contact_steps or {}).get(arm))
        for arm in ARMS
    }
    frames = []
    for t in range(length):
        q = {arm: traj[arm][t] for arm in ARMS}
        renders = [renderer(q[LEFT], q[RIGHT], cam) for cam in cameras]
        frames.append(
            Frame(
                index=t,
                images=[r[0] for r in renders],
                depths=[r[1] for r in renders] if with_depth else None,
                joints={arm: q[arm].copy() for arm in ARMS},
                action={arm: q[arm].copy() for arm in ARMS},
                gripper={arm: float(np.clip(0.5 + 0.5 * math.sin(t / 7.0), 0, 1)) for arm in ARMS},
                torque={arm: torques[arm][t] for arm in ARMS},
            )
        )
    goal = f"coordinate both arms ({name})"
    return Episode(name=name, goal=goal, cameras=cameras, frames=frames)


def generate_dataset(
    root,
    n_episodes: int = 10,
    length: int = 100,
    n_cameras: int = 1,
    image_size: int = 128,
    seed: int = 0,
    with_depth: bool = False,
    contact_episodes: bool = True,
) -> dict:
    """Write a complete synthetic workspace under `root`.

    Produces kinematics.json, cameras.json, a ready-to-run config.json, and
    dataset/ with the episodes. Returns metadata including the injected
    contact windows per episode.
    """
    root = Path(root)
    dataset_dir = root / "dataset"
    dataset_dir.mkdir(parents=True, exist_ok=True)
    chains = default_chains()
    cameras = [default_camera(image_size, image_size, i) for i in range(n_cameras)]

    with open(root / "kinematics.json", "w") as f:
        json.dump({arm: chains[arm].to_dict() for arm in ARMS}, f, indent=2, sort_keys=True)
    with open(root / "cameras.json", "w") as f:
        json.dump([c.to_dict() for c in cameras], f, indent=2, sort_keys=True)

    rng = np.random.default_rng(seed)
    truth = {}
    for e in range(n_episodes):
        name = f"ep{e:04d}"
        steps = None
        if contact_episodes and e % 2 == 1:
            start = int(rng.integers(length // 3, length // 2))
            duration = int(rng.integers(8, min(18, length - start - 1)))
            steps = {LEFT: [(start, duration, 0.9)], RIGHT: []}
            truth[name] = {"arm": LEFT, "start": start, "duration": duration}
        ep = make_episode(
            name, chains, cameras, length, rng,
            contact_steps=steps, with_depth=with_depth,
        )
        save_episode(ep, dataset_dir / name, depth_range=SYNTH_DEPTH_RANGE)

    config = {
        "dataset_in": "dataset",
        "dataset_out": "augmented",
        "kinematics": "kinematics.json",
        "cameras": "cameras.json",
        "k": 8,
        "seed": seed,
        "mode": "rgbd" if with_depth else "rgb",
        "tiling": n_cameras > 1,
        "depth_range": list(SYNTH_DEPTH_RANGE),
    }
    with open(root / "config.json", "w") as f:
        json.dump(config, f, indent=2, sort_keys=True)
    return {"contacts": truth, "config": str(root / "config.json")}
