import json

import pytest

from bimaug.config import ConfigError, apply_overrides, load_config


@pytest.fixture
def workspace(tmp_path):
    (tmp_path / "dataset").mkdir()
    (tmp_path / "kin.json").write_text("{}")
    cfg = {
        "dataset_in": "dataset",
        "dataset_out": "out",
        "kinematics": "kin.json",
        "k": 4,
        "perturbation": {"m_lb": 0.06},
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return tmp_path, path


def test_load_resolves_relative_paths(workspace):
    root, path = workspace
    cfg = load_config(path)
    assert cfg.dataset_in == (root / "dataset").resolve()
    assert cfg.dataset_out == (root / "out").resolve()
    assert cfg.k == 4
    assert cfg.perturbation.m_lb == 0.06
    assert cfg.perturbation.m_ub == 0.1  # untouched default
    assert cfg.bundles_out == cfg.dataset_out / "bundles"
    assert cfg.mode == "rgb" and cfg.seed == 0


def test_default_k_is_8(workspace):
    root, path = workspace
    data = json.loads(path.read_text())
    del data["k"]
    path.write_text(json.dumps(data))
    assert load_config(path).k == 8


def test_overrides(workspace):
    _, path = workspace
    cfg = load_config(path, ["k=2", "perturbation.m_ub=0.2", "mode=rgbd"])
    assert cfg.k == 2
    assert cfg.perturbation.m_ub == 0.2
    assert cfg.mode == "rgbd"


def test_seed_flag_wins(workspace):
    _, path = workspace
    assert load_config(path, seed=99).seed == 99
    assert load_config(path, ["seed=5"]).seed == 5


def test_validation_errors(workspace, tmp_path):
    root, path = workspace
    with pytest.raises(ConfigError):
        load_config(path, ["k=0"])
    with pytest.raises(ConfigError):
        load_config(path, ["mode=banana"])
    with pytest.raises(ConfigError):
        load_config(path, ["dataset_in=/nonexistent/nowhere"])
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = root / "broken.json"
    bad.write_text("{")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        apply_overrides({}, ["novalue"])
    with pytest.raises(ConfigError):
        load_config(path, ["depth_range=[3.0, 1.0]"])
    with pytest.raises(ConfigError):
        load_config(path, ["annealing.q_visit=3.5"])
    with pytest.raises(ConfigError):
        load_config(path, ["perturbation.m_lb=-0.1"])


def test_missing_required_path(workspace):
    root, path = workspace
    data = json.loads(path.read_text())
    del data["kinematics"]
    path.write_text(json.dumps(data))
    with pytest.raises(ConfigError):
        load_config(path)
