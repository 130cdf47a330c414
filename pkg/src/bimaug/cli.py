"""Operator-facing command line: render-skeleton, segment, augment, validate,
export-bundles, tile.

Exit codes: 0 success, 1 validation/runtime failure, 2 usage or config error.
All commands are deterministic under a fixed config + seed.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, PipelineConfig, load_config
from .episode import list_episode_dirs, load_episode
from .images import load_png, save_png, tile_views
from .pipeline import (
    augment_dataset,
    export_bundles,
    rebuild_bundles,
    segment_episode,
    validate_dataset,
)
from .renderer import build_skeleton_scene, render_skeleton
from .sampler import ARMS, LEFT, RIGHT


class CliError(Exception):
    def __init__(self, message: str, code: int = 1):
        super().__init__(message)
        self.code = code


def _require_config(args) -> PipelineConfig:
    if not args.config:
        raise CliError("this command needs --config", code=2)
    try:
        return load_config(args.config, args.set or [], seed=args.seed)
    except ConfigError as e:
        raise CliError(str(e), code=2) from e


def _find_episode(cfg: PipelineConfig, episode: str) -> Path:
    root = cfg.dataset_in
    dirs = list_episode_dirs(root)
    by_name = {d.name: d for d in dirs}
    if episode in by_name:
        return by_name[episode]
    try:
        return dirs[int(episode)]
    except (ValueError, IndexError):
        raise CliError(f"episode {episode!r} not found in {root}", code=2)


def _parse_joints(text: str | None):
    if text is None:
        return None
    try:
        values = json.loads(text)
        return np.asarray(values, dtype=float)
    except (json.JSONDecodeError, TypeError) as e:
        raise CliError(f"joint override must be a JSON array: {e}", code=2) from e


def cmd_render_skeleton(args) -> int:
    cfg = _require_config(args)
    chains = cfg.load_chains()
    ep = load_episode(_find_episode(cfg, args.episode))
    if not 0 <= args.frame < ep.length:
        raise CliError(f"frame {args.frame} out of range (episode has {ep.length})", code=2)
    frame = ep.frames[args.frame]
    joints = {arm: frame.joints[arm] for arm in ARMS}
    for arm, override in ((LEFT, args.override_left), (RIGHT, args.override_right)):
        q = _parse_joints(override)
        if q is None:
            continue
        if len(q) != chains[arm].dof:
            raise CliError(f"{arm} override length {len(q)} != DOF {chains[arm].dof}", code=2)
        if not chains[arm].within_limits(q):
            raise CliError(f"{arm} override violates joint limits", code=1)
        joints[arm] = q
    if not 0 <= args.camera < len(ep.cameras):
        raise CliError(f"camera {args.camera} out of range", code=2)
    scene = build_skeleton_scene(chains[LEFT], chains[RIGHT], joints[LEFT], joints[RIGHT], cfg.style)
    img, _ = render_skeleton(scene, ep.cameras[args.camera])
    try:
        save_png(img, args.out)
    except OSError as e:
        raise CliError(f"cannot write {args.out}: {e}", code=1) from e
    print(f"wrote {args.out}")
    return 0


def cmd_segment(args) -> int:
    cfg = _require_config(args)
    ep = load_episode(_find_episode(cfg, args.episode))
    seg = segment_episode(ep, cfg.contact)
    payload = {
        "episode": ep.name,
        "config": cfg.contact.to_dict(),
        "arms": {arm: seg[arm].to_dict() for arm in ARMS},
        "contact_any": [
            int(any(seg[arm].labels[t] == 1 for arm in ARMS)) for t in range(ep.length)
        ],
    }
    out = Path(args.out) if args.out else Path(f"segmentation_{ep.name}.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w") as f:
        json.dump(payload, f, indent=2, sort_keys=True)
    print(f"wrote {out}")
    return 0


def cmd_augment(args) -> int:
    cfg = _require_config(args)
    try:
        summary = augment_dataset(cfg, jobs=args.jobs)
    except OSError as e:
        raise CliError(str(e), code=1) from e
    print(
        f"episodes: {summary['episodes']}  frames replaced: {summary['frames_replaced']}  "
        f"sampling failed: {summary['sampling_failed']}  bundles: {summary['bundles']}"
    )
    return 0


def cmd_validate(args) -> int:
    cfg = _require_config(args)
    dataset = Path(args.dataset) if args.dataset else cfg.dataset_out
    if not dataset.is_dir():
        raise CliError(f"dataset directory not found: {dataset}", code=2)
    source = cfg.dataset_in if cfg.dataset_in != dataset else None
    problems = validate_dataset(dataset, cfg.load_chains(), source, cfg.style)
    if problems:
        for p in problems:
            print(f"VIOLATION: {p}")
        print(f"{len(problems)} violation(s) in {dataset}")
        return 1
    print(f"{dataset} OK")
    return 0


def cmd_export_bundles(args) -> int:
    cfg = _require_config(args)
    bundles = rebuild_bundles(cfg)
    out = Path(args.out) if args.out else cfg.bundles_out
    try:
        manifest = export_bundles(bundles, out, cfg.export_side)
    except OSError as e:
        raise CliError(str(e), code=1) from e
    print(f"wrote {len(manifest['bundles'])} bundles to {out}")
    return 0


def cmd_tile(args) -> int:
    if not 1 <= len(args.inputs) <= 4:
        raise CliError("tile takes 1..4 input images", code=2)
    views = [load_png(p) for p in args.inputs]
    try:
        composite = tile_views(views)
    except ValueError as e:
        raise CliError(str(e), code=1) from e
    try:
        save_png(composite, args.out)
    except OSError as e:
        raise CliError(f"cannot write {args.out}: {e}", code=1) from e
    print(f"wrote {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bimaug",
        description="Offline bimanual dataset augmentation: skeleton rendering, "
        "contact segmentation, constrained perturbation sampling, every-k reconstruction.",
    )
    parser.add_argument("--config", help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--jobs", type=int, default=1, help="worker cap for per-episode parallelism")
    parser.add_argument(
        "--set", action="append", metavar="KEY=VALUE", help="config override (dotted keys)"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("render-skeleton", help="render the skeleton pose image for one frame")
    p.add_argument("--episode", required=True, help="episode name or index")
    p.add_argument("--frame", type=int, required=True)
    p.add_argument("--camera", type=int, default=0)
    p.add_argument("--override-left", help="JSON joint array replacing the stored left joints")
    p.add_argument("--override-right", help="JSON joint array replacing the stored right joints")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render_skeleton)

    p = sub.add_parser("segment", help="contact/contactless segmentation of one episode")
    p.add_argument("--episode", required=True)
    p.add_argument("--out", help="output JSON path")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("augment", help="build the augmented dataset, bundles, and audit log")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("validate", help="check structural and augmentation invariants")
    p.add_argument("--dataset", help="dataset to validate (default: config dataset_out)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-bundles", help="rebuild conditioning bundles from an augmented dataset")
    p.add_argument("--out", help="bundle directory (default: config bundles_out)")
    p.set_defaults(func=cmd_export_bundles)

    p = sub.add_parser("tile", help="tile up to four images into a 2x2 composite")
    p.add_argument("inputs", nargs="+", help="1..4 input PNGs (row-major placement)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tile)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        print(f"error: {e}", file=sys.stderr)
        return e.code
    except (OSError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
