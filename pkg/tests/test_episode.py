import numpy as np
import pytest

from bimaug.episode import (
    Episode,
    list_episode_dirs,
    load_episode,
    save_episode,
    validate_episode_structure,
)
from bimaug.synthetic import SYNTH_DEPTH_RANGE, default_camera, default_chains, make_episode


@pytest.fixture(scope="module")
def episode():
    chains = default_chains()
    cams = [default_camera(96, 96)]
    rng = np.random.default_rng(0)
    return make_episode("ep_test", chains, cams, 12, rng, with_depth=True), chains


def test_save_load_roundtrip(tmp_path, episode):
    ep, chains = episode
    save_episode(ep, tmp_path / "ep_test", depth_range=SYNTH_DEPTH_RANGE)
    back = load_episode(tmp_path / "ep_test")
    assert back.goal == ep.goal
    assert back.length == ep.length
    assert back.arm_dof == ep.arm_dof
    for a, b in zip(ep.frames, back.frames):
        assert np.array_equal(a.images[0].data, b.images[0].data)
        for arm in ("left", "right"):
            assert np.allclose(a.joints[arm], b.joints[arm])
            assert np.allclose(a.action[arm], b.action[arm])
            assert np.allclose(a.torque[arm], b.torque[arm])
            assert a.gripper[arm] == b.gripper[arm]
        # depth survives 16-bit quantization
        fin = np.isfinite(a.depths[0].data)
        assert np.array_equal(fin, np.isfinite(b.depths[0].data))
        step = (SYNTH_DEPTH_RANGE[1] - SYNTH_DEPTH_RANGE[0]) / 65534
        assert np.max(np.abs(a.depths[0].data[fin] - b.depths[0].data[fin])) <= step


def test_save_is_deterministic(tmp_path, episode):
    ep, _ = episode
    save_episode(ep, tmp_path / "a", depth_range=SYNTH_DEPTH_RANGE)
    save_episode(ep, tmp_path / "b", depth_range=SYNTH_DEPTH_RANGE)
    for rel in sorted(p.relative_to(tmp_path / "a") for p in (tmp_path / "a").rglob("*") if p.is_file()):
        assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel


def test_structure_validation_flags_corruption(episode):
    ep, chains = episode
    assert validate_episode_structure(ep, chains) == []
    bad = ep.copy()
    bad.frames[3].action["left"] = np.zeros(2)
    problems = validate_episode_structure(bad, chains)
    assert any("t=3" in p and "action" in p for p in problems)
    bad2 = ep.copy()
    bad2.frames[5].joints["right"][0] = np.nan
    problems = validate_episode_structure(bad2, chains)
    assert any("t=5" in p and "non-finite" in p for p in problems)


def test_list_episode_dirs_sorted(tmp_path, episode):
    ep, _ = episode
    for name in ("ep0002", "ep0000", "ep0001"):
        e = ep.copy()
        e.name = name
        save_episode(e, tmp_path / name)
    (tmp_path / "not_an_episode").mkdir()
    dirs = list_episode_dirs(tmp_path)
    assert [d.name for d in dirs] == ["ep0000", "ep0001", "ep0002"]


def test_seed_id_stable(episode):
    ep, _ = episode
    assert ep.seed_id() == ep.copy().seed_id()
    other = ep.copy()
    other.name = "different"
    assert other.seed_id() != ep.seed_id()
