import math

import numpy as np
import pytest

from bimaug.kinematics import (
    IkConfig,
    Joint,
    KinematicChain,
    apply_eef_perturbation,
    fk_eef,
    forward_kinematics,
    jacobian,
    solve_ik_lm,
)
from bimaug.se3 import SE3Pose, perturbed_pose, pose_difference

from conftest import planar_chain, random_chain
from oracles import planar_fk_points


def test_fk_one_link_identity():
    chain = planar_chain([1.0])
    frames = forward_kinematics(chain, [0.0])
    assert len(frames) == 1
    assert np.allclose(frames[-1].trans, [1.0, 0.0, 0.0], atol=1e-12)


def test_fk_two_link_right_angle():
    chain = planar_chain([1.0, 1.0])
    frames = forward_kinematics(chain, [math.pi / 2, 0.0])
    assert np.allclose(frames[-1].trans, [0.0, 2.0, 0.0], atol=1e-12)


def test_fk_two_link_derived_angles():
    # closed-form planar FK oracle: x = cos q1 + cos(q1+q2), y = sin q1 + sin(q1+q2)
    chain = planar_chain([1.0, 1.0])
    expected = planar_fk_points([1.0, 1.0], [0.3, 0.7])
    frames = forward_kinematics(chain, [0.3, 0.7])
    for frame, point in zip(frames, expected):
        assert np.allclose(frame.trans, point, atol=1e-12)
    assert np.allclose(
        frames[-1].trans,
        [math.cos(0.3) + math.cos(1.0), math.sin(0.3) + math.sin(1.0), 0.0],
        atol=1e-12,
    )


def test_fk_matches_planar_oracle_randomized():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n = int(rng.integers(1, 6))
        lengths = rng.uniform(0.2, 1.0, size=n)
        q = rng.uniform(-np.pi, np.pi, size=n)
        frames = forward_kinematics(planar_chain(lengths), q)
        for frame, point in zip(frames, planar_fk_points(lengths, q)):
            assert np.allclose(frame.trans, point, atol=1e-9)


def test_fk_dimension_mismatch():
    chain = planar_chain([1.0, 1.0])
    with pytest.raises(ValueError):
        forward_kinematics(chain, [0.1])


def test_fk_length_preserving():
    rng = np.random.default_rng(1)
    for _ in range(50):
        chain = random_chain(rng)
        q = rng.uniform(-2.0, 2.0, size=chain.dof)
        frames = forward_kinematics(chain, q)
        points = [chain.base_pose.trans] + [f.trans for f in frames]
        gaps = [np.linalg.norm(points[i + 1] - points[i]) for i in range(len(points) - 1)]
        assert np.allclose(gaps, chain.link_lengths(), atol=1e-9)


def test_jacobian_matches_finite_differences():
    rng = np.random.default_rng(2)
    eps = 1e-7
    for _ in range(20):
        chain = random_chain(rng)
        q = rng.uniform(-1.5, 1.5, size=chain.dof)
        J = jacobian(chain, q)
        p0 = fk_eef(chain, q).trans
        for i in range(chain.dof):
            dq = q.copy()
            dq[i] += eps
            num = (fk_eef(chain, dq).trans - p0) / eps
            assert np.allclose(J[:3, i], num, atol=1e-5)


def test_ik_zero_iteration_fixed_point():
    chain = planar_chain([1.0, 1.0])
    q0 = np.array([0.4, -0.8])
    target = fk_eef(chain, q0)
    q = solve_ik_lm(chain, target, q0)
    assert q is not None
    assert np.allclose(q, q0, atol=1e-12)  # seed already satisfies the target


def test_ik_roundtrip_near_seed():
    rng = np.random.default_rng(3)
    cfg = IkConfig()
    for _ in range(50):
        chain = random_chain(rng)
        q_true = rng.uniform(-1.5, 1.5, size=chain.dof)
        target = fk_eef(chain, q_true)
        seed = chain.clamp(q_true + rng.normal(scale=0.05, size=chain.dof))
        q = solve_ik_lm(chain, target, seed, cfg)
        assert q is not None
        dt, dr = pose_difference(fk_eef(chain, q), target)
        assert dt <= cfg.pos_tol and dr <= cfg.rot_tol
        assert chain.within_limits(q)


def test_ik_out_of_reach_is_infeasible():
    chain = planar_chain([1.0, 1.0])  # reach 2 m
    target = SE3Pose(trans=np.array([3.0, 0.0, 0.0]))
    assert solve_ik_lm(chain, target, np.zeros(2)) is None


def test_ik_rejects_bad_input():
    chain = planar_chain([1.0, 1.0])
    with pytest.raises(ValueError):
        solve_ik_lm(chain, SE3Pose.identity(), np.zeros(3))
    with pytest.raises(ValueError):
        solve_ik_lm(chain, SE3Pose.identity(), np.array([np.nan, 0.0]))


def test_apply_eef_perturbation_identity():
    chain = planar_chain([1.0, 1.0])
    q0 = np.array([0.3, 0.5])
    q = apply_eef_perturbation(chain, q0, SE3Pose.identity())
    assert q is not None
    assert np.allclose(q, q0, atol=1e-12)


def test_apply_eef_perturbation_translation_roundtrip():
    rng = np.random.default_rng(4)
    cfg = IkConfig()
    for _ in range(30):
        chain = random_chain(rng, dof=6)
        q0 = rng.uniform(-1.2, 1.2, size=6)
        direction = rng.normal(size=3)
        delta = SE3Pose(trans=direction / np.linalg.norm(direction) * 0.05)
        q = apply_eef_perturbation(chain, q0, delta, cfg)
        if q is None:
            continue  # infeasible is allowed, wrong answers are not
        expected = perturbed_pose(fk_eef(chain, q0), delta)
        dt, dr = pose_difference(fk_eef(chain, q), expected)
        assert dt <= cfg.pos_tol and dr <= cfg.rot_tol


def test_apply_eef_perturbation_beyond_reach():
    chain = planar_chain([1.0, 1.0])
    delta = SE3Pose(trans=np.array([5.0, 0.0, 0.0]))
    assert apply_eef_perturbation(chain, np.zeros(2), delta) is None


def test_chain_invariants():
    with pytest.raises(ValueError):
        Joint(axis=np.zeros(3), origin=SE3Pose.identity(), limits=(-1, 1))
    with pytest.raises(ValueError):
        Joint(axis=np.array([0, 0, 1.0]), origin=SE3Pose.identity(), limits=(1, -1))
    j = Joint(axis=np.array([0, 0, 2.0]), origin=SE3Pose.identity(), limits=(-1, 1))
    assert abs(np.linalg.norm(j.axis) - 1.0) < 1e-9
    with pytest.raises(ValueError):
        KinematicChain(name="empty", base_pose=SE3Pose.identity(), joints=())


def test_chain_json_roundtrip(tmp_path):
    rng = np.random.default_rng(5)
    chain = random_chain(rng, dof=4)
    path = tmp_path / "chain.json"
    chain.save(path)
    loaded = KinematicChain.load(path)
    q = rng.uniform(-1.0, 1.0, size=4)
    dt, dr = pose_difference(fk_eef(chain, q), fk_eef(loaded, q))
    assert dt < 1e-12 and dr < 1e-12
