"""Episodic dataset model and its on-disk layout.

One directory per episode: `episode.json` (goal, cameras, arm DOFs),
`frames.jsonl` (numeric state, one line per frame), `rgb/cam{c}_{t}.png`
images and optionally `depth/cam{c}_{t}.png` 16-bit depth with JSON sidecars.
The layout is diff-able and supports partial ingestion; a container importer
is out of scope.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraModel
from .images import DepthMap, ImageBuffer, load_depth_png, load_png, save_depth_png, save_png
from .sampler import ARMS

DEFAULT_DEPTH_RANGE = (0.1, 3.0)


@dataclass
class Frame:
    index: int
    images: list[ImageBuffer]
    joints: dict[str, np.ndarray]
    action: dict[str, np.ndarray]
    gripper: dict[str, float]
    torque: dict[str, np.ndarray]
    depths: list[DepthMap] | None = None

    def copy(self) -> "Frame":
        return Frame(
            index=self.index,
            images=[im.copy() for im in self.images],
            joints={k: v.copy() for k, v in self.joints.items()},
            action={k: v.copy() for k, v in self.action.items()},
            gripper=dict(self.gripper),
            torque={k: v.copy() for k, v in self.torque.items()},
            depths=[d.copy() for d in self.depths] if self.depths is not None else None,
        )

    def state_dict(self) -> dict:
        return {
            "t": self.index,
            "joints": {k: [float(x) for x in v] for k, v in self.joints.items()},
            "action": {k: [float(x) for x in v] for k, v in self.action.items()},
            "gripper": {k: float(v) for k, v in self.gripper.items()},
            "torque": {k: [float(x) for x in v] for k, v in self.torque.items()},
        }


@dataclass
class Episode:
    name: str
    goal: str
    cameras: list[CameraModel]
    frames: list[Frame]
    arm_dof: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= len(self.cameras) <= 4:
            raise ValueError("episodes carry 1..4 cameras")
        if not self.arm_dof:
            if self.frames:
                self.arm_dof = {arm: len(self.frames[0].joints[arm]) for arm in ARMS}

    @property
    def length(self) -> int:
        return len(self.frames)

    @property
    def has_depth(self) -> bool:
        return bool(self.frames) and self.frames[0].depths is not None

    def copy(self) -> "Episode":
        return Episode(
            name=self.name,
            goal=self.goal,
            cameras=list(self.cameras),
            frames=[f.copy() for f in self.frames],
            arm_dof=dict(self.arm_dof),
        )

    def seed_id(self) -> int:
        """Stable integer identity for per-frame RNG stream derivation."""
        return zlib.crc32(self.name.encode("utf-8"))


class EpisodeFormatError(ValueError):
    pass


def validate_episode_structure(ep: Episode, chains=None) -> list[str]:
    """Structural invariant check; returns a list of violation strings."""
    problems = []
    if ep.frames:
        n_cams = len(ep.frames[0].images)
        dims = [(im.width, im.height) for im in ep.frames[0].images]
        if n_cams != len(ep.cameras):
            problems.append(f"{ep.name}: frame image count {n_cams} != cameras {len(ep.cameras)}")
        for f in ep.frames:
            if len(f.images) != n_cams:
                problems.append(f"{ep.name}[t={f.index}]: camera count changed")
                continue
            for c, im in enumerate(f.images):
                if (im.width, im.height) != dims[c]:
                    problems.append(f"{ep.name}[t={f.index}] cam{c}: image dimensions changed")
                if im.channels != 3:
                    problems.append(f"{ep.name}[t={f.index}] cam{c}: expected RGB image")
            for arm in ARMS:
                for fieldname, vec in (("joints", f.joints[arm]), ("action", f.action[arm])):
                    if len(vec) != ep.arm_dof[arm]:
                        problems.append(
                            f"{ep.name}[t={f.index}] {arm}.{fieldname}: length {len(vec)} != DOF"
                        )
                    if not np.all(np.isfinite(vec)):
                        problems.append(f"{ep.name}[t={f.index}] {arm}.{fieldname}: non-finite")
                if not np.all(np.isfinite(f.torque[arm])):
                    problems.append(f"{ep.name}[t={f.index}] {arm}.torque: non-finite")
                if chains is not None and ep.arm_dof[arm] != chains[arm].dof:
                    problems.append(f"{ep.name}: {arm} DOF {ep.arm_dof[arm]} != chain DOF")
    return problems


def _image_path(root: Path, kind: str, cam: int, t: int) -> Path:
    return root / kind / f"cam{cam}_{t:06d}.png"


def save_episode(ep: Episode, path, depth_range: tuple[float, float] = DEFAULT_DEPTH_RANGE) -> None:
    root = Path(path)
    (root / "rgb").mkdir(parents=True, exist_ok=True)
    if ep.has_depth:
        (root / "depth").mkdir(parents=True, exist_ok=True)
    meta = {
        "goal": ep.goal,
        "cameras": [c.to_dict() for c in ep.cameras],
        "arms": {arm: int(ep.arm_dof[arm]) for arm in ARMS},
        "num_frames": ep.length,
        "has_depth": ep.has_depth,
    }
    with open(root / "episode.json", "w") as f:
        json.dump(meta, f, indent=2, sort_keys=True)
    with open(root / "frames.jsonl", "w") as f:
        for frame in ep.frames:
            f.write(json.dumps(frame.state_dict(), sort_keys=True) + "\n")
    for frame in ep.frames:
        for c, im in enumerate(frame.images):
            save_png(im, _image_path(root, "rgb", c, frame.index))
        if ep.has_depth:
            if frame.depths is None:
                raise ValueError(f"{ep.name}[t={frame.index}]: depth missing mid-episode")
            for c, dm in enumerate(frame.depths):
                save_depth_png(dm, _image_path(root, "depth", c, frame.index), *depth_range)


def load_episode(path) -> Episode:
    root = Path(path)
    try:
        with open(root / "episode.json") as f:
            meta = json.load(f)
    except FileNotFoundError as e:
        raise EpisodeFormatError(f"not an episode directory: {root}") from e
    cameras = [CameraModel.from_dict(d) for d in meta["cameras"]]
    frames = []
    with open(root / "frames.jsonl") as f:
        for line in f:
            if not line.strip():
                continue
            d = json.loads(line)
            t = int(d["t"])
            images = [load_png(_image_path(root, "rgb", c, t)) for c in range(len(cameras))]
            depths = None
            if meta.get("has_depth"):
                depths = [load_depth_png(_image_path(root, "depth", c, t)) for c in range(len(cameras))]
            frames.append(
                Frame(
                    index=t,
                    images=images,
                    depths=depths,
                    joints={k: np.asarray(v, dtype=float) for k, v in d["joints"].items()},
                    action={k: np.asarray(v, dtype=float) for k, v in d["action"].items()},
                    gripper={k: float(v) for k, v in d["gripper"].items()},
                    torque={k: np.asarray(v, dtype=float) for k, v in d["torque"].items()},
                )
            )
    frames.sort(key=lambda fr: fr.index)
    return Episode(
        name=root.name,
        goal=meta["goal"],
        cameras=cameras,
        frames=frames,
        arm_dof={k: int(v) for k, v in meta["arms"].items()},
    )


def list_episode_dirs(dataset_dir) -> list[Path]:
    root = Path(dataset_dir)
    if not root.is_dir():
        raise EpisodeFormatError(f"dataset directory not found: {root}")
    return sorted(p for p in root.iterdir() if (p / "episode.json").is_file())
