import json
import os
import stat
from pathlib import Path

import numpy as np
import pytest

from bimaug.cli import main
from bimaug.images import load_png, save_png, ImageBuffer


def run(*argv):
    return main([str(a) for a in argv])


def _tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()
    }


@pytest.fixture(scope="module")
def ws(synth_workspace):
    return synth_workspace["root"], synth_workspace["info"]


def test_usage_errors_exit_2(tmp_path):
    assert run("augment") == 2  # no config
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run("--config", bad, "augment") == 2


def test_render_skeleton_stored_and_override(ws, tmp_path):
    root, _ = ws
    cfg = root / "config.json"
    out = tmp_path / "skel.png"
    assert run("--config", cfg, "render-skeleton", "--episode", "ep0000", "--frame", "3", "--out", out) == 0
    img = load_png(out)
    assert img.width == 128 and np.any(img.data != 0)

    # override with the stored joints -> identical PNG
    frames = (root / "dataset" / "ep0000" / "frames.jsonl").read_text().splitlines()
    stored = json.loads(frames[3])["joints"]
    out2 = tmp_path / "skel2.png"
    assert (
        run(
            "--config", cfg, "render-skeleton", "--episode", "ep0000", "--frame", "3",
            "--override-left", json.dumps(stored["left"]),
            "--override-right", json.dumps(stored["right"]),
            "--out", out2,
        )
        == 0
    )
    assert out.read_bytes() == out2.read_bytes()

    # out-of-limit override -> validation exit code
    bad = [100.0] * 6
    assert (
        run(
            "--config", cfg, "render-skeleton", "--episode", "ep0000", "--frame", "3",
            "--override-left", json.dumps(bad), "--out", tmp_path / "never.png",
        )
        == 1
    )
    # missing frame -> usage error
    assert (
        run("--config", cfg, "render-skeleton", "--episode", "ep0000", "--frame", "999",
            "--out", tmp_path / "never.png")
        == 2
    )


def test_render_skeleton_matches_projection(ws, tmp_path):
    from bimaug.config import load_config
    from bimaug.episode import load_episode
    from bimaug.renderer import build_skeleton_scene, sphere_center_alignment

    root, _ = ws
    cfg = load_config(root / "config.json")
    chains = cfg.load_chains()
    ep = load_episode(cfg.dataset_in / "ep0000")
    frame = ep.frames[3]
    scene = build_skeleton_scene(
        chains["left"], chains["right"], frame.joints["left"], frame.joints["right"], cfg.style
    )
    errors = [e for e in sphere_center_alignment(scene, ep.cameras[0]) if e is not None]
    assert errors and max(errors) < 1.0


def test_segment_onset_and_determinism(ws, tmp_path):
    # a longer dedicated episode: short fixtures leave too few rows for a
    # stable AR fit, which is a property of the data, not the detector
    from bimaug.synthetic import default_camera, default_chains, make_episode
    from bimaug.episode import save_episode

    root, _ = ws
    chains = default_chains()
    ep = make_episode(
        "long0", chains, [default_camera(64, 64)], 120, np.random.default_rng(4),
        contact_steps={"left": [(60, 14, 0.9)], "right": []},
    )
    ds = tmp_path / "dataset"
    save_episode(ep, ds / "long0")
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "dataset_in": "dataset",
                "dataset_out": "aug",
                "kinematics": str(root / "kinematics.json"),
            }
        )
    )
    out = tmp_path / "seg.json"
    assert run("--config", cfg_path, "segment", "--episode", "long0", "--out", out) == 0
    payload = json.loads(out.read_text())
    labels = payload["arms"]["left"]["labels"]
    assert labels.index(1) == 60
    # rerun -> byte-identical
    out2 = tmp_path / "seg2.json"
    assert run("--config", cfg_path, "segment", "--episode", "long0", "--out", out2) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_segment_zero_torque_all_contactless(ws, tmp_path):
    root, _ = ws
    # clone an episode with zeroed torques into a fresh dataset
    from bimaug.episode import load_episode, save_episode

    ep = load_episode(root / "dataset" / "ep0000")
    for f in ep.frames:
        f.torque = {arm: np.zeros_like(f.torque[arm]) for arm in ("left", "right")}
    ds = tmp_path / "dataset"
    save_episode(ep, ds / "ep0000")
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(
        json.dumps(
            {
                "dataset_in": "dataset",
                "dataset_out": "aug",
                "kinematics": str(root / "kinematics.json"),
            }
        )
    )
    out = tmp_path / "seg.json"
    assert run("--config", cfg_path, "segment", "--episode", "ep0000", "--out", out) == 0
    payload = json.loads(out.read_text())
    assert all(v == 0 for v in payload["contact_any"])


def test_augment_summary_and_determinism(ws, tmp_path, capsys):
    root, _ = ws
    cfg = root / "config.json"
    out_a = tmp_path / "aug_a"
    out_b = tmp_path / "aug_b"
    bundles_a = tmp_path / "bna"
    bundles_b = tmp_path / "bnb"
    assert run("--config", cfg, "--set", f"dataset_out={out_a}",
               "--set", f"bundles_out={bundles_a}", "augment") == 0
    summary = capsys.readouterr().out
    assert "frames replaced: 6" in summary  # 3 episodes x (24//8 - 1 + 1) = 2 each
    assert run("--config", cfg, "--set", f"dataset_out={out_b}",
               "--set", f"bundles_out={bundles_b}", "augment") == 0
    tree_a = _tree_bytes(out_a)
    tree_b = _tree_bytes(out_b)
    # identical file sets and identical bytes except the embedded output paths
    assert set(tree_a) == set(tree_b)
    for rel in tree_a:
        if rel == "config.json":
            continue
        assert tree_a[rel] == tree_b[rel], rel
    assert _tree_bytes(bundles_a) == _tree_bytes(bundles_b)


def test_augment_unwritable_output(ws, tmp_path):
    if os.geteuid() == 0:
        pytest.skip("running as root: directory permissions are not enforced")
    root, _ = ws
    cfg = root / "config.json"
    blocked = tmp_path / "blocked"
    blocked.mkdir()
    blocked.chmod(stat.S_IRUSR | stat.S_IXUSR)
    code = run("--config", cfg, "--set", f"dataset_out={blocked / 'out'}", "augment")
    assert code == 1


def test_augment_output_path_is_file_fails(ws, tmp_path, capsys):
    root, _ = ws
    cfg = root / "config.json"
    target = tmp_path / "occupied"
    target.write_text("a file, not a directory")
    code = run("--config", cfg, "--set", f"dataset_out={target}", "augment")
    assert code == 1
    assert str(target) in capsys.readouterr().err


def test_validate_detects_corruption(ws, tmp_path, capsys):
    root, _ = ws
    cfg = root / "config.json"
    out = tmp_path / "aug"
    assert run("--config", cfg, "--set", f"dataset_out={out}",
               "--set", f"bundles_out={tmp_path / 'bn'}", "augment") == 0
    assert run("--config", cfg, "--set", f"dataset_out={out}", "validate") == 0

    # corrupt one action vector in a non-replaced frame
    ep_dir = out / "ep0000"
    lines = (ep_dir / "frames.jsonl").read_text().splitlines()
    marker = json.loads((ep_dir / "augmentation.json").read_text())
    replaced = {r["frame"] for r in marker["replaced"]}
    victim = next(t for t in range(len(lines)) if t not in replaced)
    record = json.loads(lines[victim])
    record["action"]["left"] = record["action"]["left"][:2]
    lines[victim] = json.dumps(record, sort_keys=True)
    (ep_dir / "frames.jsonl").write_text("\n".join(lines) + "\n")
    capsys.readouterr()
    assert run("--config", cfg, "--set", f"dataset_out={out}", "validate") == 1
    report = capsys.readouterr().out
    assert "ep0000" in report and f"t={victim}" in report and "action" in report


def test_export_bundles_cli(ws, tmp_path):
    root, _ = ws
    cfg = root / "config.json"
    out = tmp_path / "aug"
    bundles = tmp_path / "bundles"
    assert run("--config", cfg, "--set", f"dataset_out={out}",
               "--set", f"bundles_out={bundles}", "augment") == 0
    rebuilt = tmp_path / "rebuilt"
    assert run("--config", cfg, "--set", f"dataset_out={out}", "export-bundles", "--out", rebuilt) == 0
    assert (rebuilt / "manifest.json").read_bytes() == (bundles / "manifest.json").read_bytes()


def test_tile_cli(tmp_path):
    paths = []
    for i, color in enumerate([(255, 0, 0), (0, 255, 0), (0, 0, 255), (40, 40, 40)]):
        img = ImageBuffer.from_array(np.full((16, 16, 3), color, np.uint8))
        p = tmp_path / f"v{i}.png"
        save_png(img, p)
        paths.append(p)
    out = tmp_path / "tiled.png"
    assert run("tile", *paths, "--out", out) == 0
    composite = load_png(out)
    assert (composite.width, composite.height) == (32, 32)
    assert tuple(composite.data[0, 0]) == (255, 0, 0)
    assert tuple(composite.data[0, 31]) == (0, 255, 0)
    assert tuple(composite.data[31, 0]) == (0, 0, 255)
    assert tuple(composite.data[31, 31]) == (40, 40, 40)

    # mismatched dimensions -> validation failure
    odd = ImageBuffer.from_array(np.zeros((8, 16, 3), np.uint8))
    save_png(odd, tmp_path / "odd.png")
    assert run("tile", paths[0], tmp_path / "odd.png", "--out", tmp_path / "x.png") == 1
