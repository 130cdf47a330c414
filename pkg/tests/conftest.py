from __future__ import annotations

import numpy as np
import pytest

from bimaug.kinematics import Joint, KinematicChain
from bimaug.se3 import SE3Pose, quat_from_axis_angle


def planar_chain(link_lengths, name="planar") -> KinematicChain:
    """Revolute-about-z chain with links along +x, rooted at the origin."""
    joints = tuple(
        Joint(
            axis=np.array([0.0, 0.0, 1.0]),
            origin=SE3Pose(trans=np.array([L, 0.0, 0.0])),
            limits=(-np.pi, np.pi),
        )
        for L in link_lengths
    )
    return KinematicChain(name=name, base_pose=SE3Pose.identity(), joints=joints)


def random_unit(rng) -> np.ndarray:
    v = rng.normal(size=3)
    return v / np.linalg.norm(v)


def random_pose(rng, scale=0.5) -> SE3Pose:
    return SE3Pose(
        quat_from_axis_angle(random_unit(rng), rng.uniform(-np.pi, np.pi)),
        rng.uniform(-scale, scale, size=3),
    )


def random_chain(rng, dof=None) -> KinematicChain:
    dof = int(dof if dof is not None else rng.integers(2, 8))
    joints = tuple(
        Joint(
            axis=random_unit(rng),
            origin=SE3Pose(
                quat_from_axis_angle(random_unit(rng), rng.uniform(-0.4, 0.4)),
                random_unit(rng) * rng.uniform(0.15, 0.35),
            ),
            limits=(-2.9, 2.9),
        )
        for _ in range(dof)
    )
    return KinematicChain(name=f"random{dof}", base_pose=random_pose(rng), joints=joints)


@pytest.fixture(scope="session")
def synth_workspace(tmp_path_factory):
    """Small synthetic dataset shared by pipeline/CLI tests."""
    from bimaug.synthetic import generate_dataset

    root = tmp_path_factory.mktemp("workspace")
    info = generate_dataset(root, n_episodes=3, length=24, seed=11)
    return {"root": root, "info": info}
