"""Pipeline configuration: one JSON file plus `--set key=value` overrides.

Relative paths are resolved against the config file's directory so the config
can live inside the workspace it describes and be copied verbatim into every
output tree for auditability.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .annealing import AnnealConfig
from .contact import ContactConfig
from .camera import CameraModel
from .episode import DEFAULT_DEPTH_RANGE
from .kinematics import IkConfig, KinematicChain
from .renderer import StyleConfig
from .sampler import ARMS, PerturbationConfig


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    dataset_in: Path
    dataset_out: Path
    kinematics: Path
    cameras: Path | None = None
    bundles_out: Path | None = None
    k: int = 8
    seed: int = 0
    mode: str = "rgb"
    tiling: bool = False
    export_side: int | None = None
    depth_range: tuple[float, float] = DEFAULT_DEPTH_RANGE
    perturbation: PerturbationConfig = field(default_factory=PerturbationConfig)
    annealing: AnnealConfig = field(default_factory=lambda: AnnealConfig(max_iters=200))
    contact: ContactConfig = field(default_factory=ContactConfig)
    style: StyleConfig = field(default_factory=StyleConfig)
    ik: IkConfig = field(default_factory=IkConfig)
    raw: dict = field(default_factory=dict)

    def load_chains(self) -> dict[str, KinematicChain]:
        try:
            with open(self.kinematics) as f:
                data = json.load(f)
            return {arm: KinematicChain.from_dict(data[arm]) for arm in ARMS}
        except (OSError, KeyError, ValueError) as e:
            raise ConfigError(f"bad kinematics file {self.kinematics}: {e}") from e

    def load_cameras(self) -> list[CameraModel] | None:
        if self.cameras is None:
            return None
        try:
            with open(self.cameras) as f:
                return [CameraModel.from_dict(d) for d in json.load(f)]
        except (OSError, ValueError) as e:
            raise ConfigError(f"bad cameras file {self.cameras}: {e}") from e

    def resolved_dict(self) -> dict:
        """The effective config with absolute paths, written into output trees."""
        out = dict(self.raw)
        for key in ("dataset_in", "dataset_out", "kinematics", "cameras", "bundles_out"):
            value = getattr(self, key)
            if value is not None:
                out[key] = str(value)
        out.update(
            k=self.k,
            seed=self.seed,
            mode=self.mode,
            tiling=self.tiling,
            export_side=self.export_side,
            depth_range=list(self.depth_range),
            perturbation=self.perturbation.to_dict(),
            annealing=self.annealing.to_dict(),
            contact=self.contact.to_dict(),
            style=self.style.to_dict(),
            ik=self.ik.to_dict(),
        )
        return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply dotted `key=value` overrides (values parsed as JSON when possible)."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, _, value = item.partition("=")
        node = data
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot override through non-object key {part!r}")
        node[parts[-1]] = _parse_value(value)
    return data


def load_config(path, overrides: list[str] | None = None, seed: int | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from e
    apply_overrides(data, overrides or [])
    base = path.parent

    def _path(key, required):
        value = data.get(key)
        if value is None:
            if required:
                raise ConfigError(f"config missing required path {key!r}")
            return None
        return (base / value).resolve() if not Path(value).is_absolute() else Path(value)

    try:
        cfg = PipelineConfig(
            dataset_in=_path("dataset_in", True),
            dataset_out=_path("dataset_out", True),
            kinematics=_path("kinematics", True),
            cameras=_path("cameras", False),
            bundles_out=_path("bundles_out", False),
            k=int(data.get("k", 8)),
            seed=int(data.get("seed", 0)) if seed is None else int(seed),
            mode=str(data.get("mode", "rgb")),
            tiling=bool(data.get("tiling", False)),
            export_side=None if data.get("export_side") is None else int(data["export_side"]),
            depth_range=tuple(data.get("depth_range", DEFAULT_DEPTH_RANGE)),
            perturbation=PerturbationConfig.from_dict(data.get("perturbation", {})),
            annealing=AnnealConfig.from_dict({"max_iters": 200, **data.get("annealing", {})}),
            contact=ContactConfig.from_dict(data.get("contact", {})),
            style=StyleConfig.from_dict(data.get("style", {})),
            ik=IkConfig.from_dict(data.get("ik", {})),
            raw=data,
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"bad config value: {e}") from e
    if cfg.k < 1:
        raise ConfigError("k must be >= 1")
    if cfg.mode not in ("rgb", "rgbd"):
        raise ConfigError(f"mode must be rgb or rgbd, got {cfg.mode!r}")
    if len(cfg.depth_range) != 2 or not cfg.depth_range[0] < cfg.depth_range[1]:
        raise ConfigError(f"depth_range must be [d_min, d_max] with d_min < d_max, got {cfg.depth_range}")
    try:
        cfg.annealing.validate()
    except ValueError as e:
        raise ConfigError(f"annealing config: {e}") from e
    for key in ("dataset_in", "kinematics"):
        p = getattr(cfg, key)
        if not p.exists():
            raise ConfigError(f"{key} path does not exist: {p}")
    if cfg.cameras is not None and not cfg.cameras.exists():
        raise ConfigError(f"cameras path does not exist: {cfg.cameras}")
    if cfg.bundles_out is None:
        cfg.bundles_out = cfg.dataset_out / "bundles"
    return cfg
