"""Every-k dataset reconstruction with relabeled actions and bundle export.

The augmented dataset duplicates the source: only the frames at
replacement_indices change (images re-synthesized from the perturbed skeleton
pose, actions relabeled through IK); everything else stays byte-identical.
The image synthesizer is a pluggable seam; the built-in overlay synthesizer
composites the skeleton render over the source image so the output remains
visually auditable without any learned model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .camera import CameraModel, pad_and_rescale
from .contact import CONTACT, ContactConfig, ContactSegmentation, fit_ar_model, segment_contacts
from .episode import DEFAULT_DEPTH_RANGE, Episode, Frame
from .images import (
    DepthMap,
    ImageBuffer,
    encode_depth_colormap,
    save_png,
    split_views,
    stack_planes,
    tile_views,
)
from .kinematics import KinematicChain
from .renderer import StyleConfig, build_skeleton_scene, render_skeleton
from .sampler import ARMS, LEFT, RIGHT, FramePerturbation, FrameSampler, SamplingFailed
from .se3 import SE3Pose


def replacement_indices(T: int, k: int) -> list[int]:
    """Frame indices {k, 2k, ...} strictly below T."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    return list(range(k, T, k))


@dataclass
class ConditioningBundle:
    """Everything an external image synthesizer needs for one augmented view."""

    episode: str
    frame: int
    camera: str  # "cam0".."cam3", or "tiled" for the 2x2 composite
    source: ImageBuffer  # rgb, or depth colormap in rgbd mode
    skeleton: ImageBuffer
    action: dict[str, np.ndarray]
    delta: dict[str, SE3Pose]
    phase: str
    goal: str
    target_rgb: ImageBuffer | None = None  # depth-mode bundles only

    def __post_init__(self):
        if (self.skeleton.width, self.skeleton.height) != (self.source.width, self.source.height):
            raise ValueError("skeleton and source dimensions differ")
        if self.source.channels != self.skeleton.channels:
            raise ValueError("skeleton and source channel counts differ")

    def conditioning(self) -> ImageBuffer:
        """6-channel conditioning plane stack: target rgb first, then skeleton."""
        if self.target_rgb is None:
            raise ValueError("only depth-mode bundles have a 6-channel conditioning stack")
        return stack_planes(self.target_rgb, self.skeleton)


def overlay_synthesizer(bundle: ConditioningBundle) -> ImageBuffer:
    """Composite the skeleton over the source: skeleton pixels are opaque,
    black skeleton background is transparent. Deterministic reference stand-in
    for a learned image synthesizer."""
    mask = np.any(bundle.skeleton.data != 0, axis=2)
    out = bundle.source.data.copy()
    out[mask] = bundle.skeleton.data[mask]
    return ImageBuffer(bundle.source.width, bundle.source.height, bundle.source.channels, out)


class SkeletonRenderer:
    """Chains + style bound into a per-camera render callable."""

    def __init__(self, chains: dict[str, KinematicChain], style: StyleConfig | None = None):
        self.chains = chains
        self.style = style or StyleConfig()

    def __call__(self, q_left, q_right, cam: CameraModel) -> tuple[ImageBuffer, DepthMap]:
        scene = build_skeleton_scene(
            self.chains[LEFT], self.chains[RIGHT], q_left, q_right, self.style
        )
        return render_skeleton(scene, cam)


def segment_episode(ep: Episode, cfg: ContactConfig | None = None) -> dict[str, ContactSegmentation]:
    """Per-arm contact segmentation of one episode's torque traces."""
    cfg = cfg or ContactConfig()
    out = {}
    for arm in ARMS:
        trace = np.stack([f.torque[arm] for f in ep.frames])
        model = fit_ar_model(trace, cfg.order)
        out[arm] = segment_contacts(trace, model, cfg)
    return out


def contact_at(seg: dict[str, ContactSegmentation], t: int) -> bool:
    """A frame counts as contact-rich when EITHER arm is in contact."""
    return any(seg[arm].labels[t] == CONTACT for arm in ARMS)


@dataclass
class AugmentOutcome:
    episode: Episode
    bundles: list[ConditioningBundle]
    replaced: list[int]
    failed: list[dict]
    records: list[dict] = field(default_factory=list)


def _delta_dict(delta: dict[str, SE3Pose]) -> dict:
    return {arm: delta[arm].to_dict() for arm in ARMS}


def _frame_bundles(
    ep: Episode,
    frame: Frame,
    pert: FramePerturbation,
    renders: list[tuple[ImageBuffer, DepthMap]],
    synthesizer,
    mode: str,
    tiling: bool,
    depth_range: tuple[float, float],
) -> tuple[list[ConditioningBundle], list[ImageBuffer], list[DepthMap] | None]:
    """Synthesize one frame's new images and assemble its export bundles.

    Returns (bundles, new rgb images per camera, new depths per camera or None).
    """
    meta = dict(
        episode=ep.name,
        frame=frame.index,
        action={arm: pert.joints[arm] for arm in ARMS},
        delta=pert.deltas,
        phase=pert.phase,
        goal=ep.goal,
    )
    skeletons = [r[0] for r in renders]
    new_depths = None
    if mode == "rgbd":
        if frame.depths is None:
            raise ValueError(f"{ep.name}[t={frame.index}]: rgbd mode needs depth maps")
        new_depths = [
            DepthMap(d.width, d.height, np.minimum(d.data, r[1].data))
            for d, r in zip(frame.depths, renders)
        ]

    tiled = tiling and len(ep.cameras) > 1
    if tiled:
        rgb_bundles = [
            ConditioningBundle(
                camera="tiled", source=tile_views(frame.images), skeleton=tile_views(skeletons), **meta
            )
        ]
    else:
        rgb_bundles = [
            ConditioningBundle(camera=f"cam{c}", source=src, skeleton=skel, **meta)
            for c, (src, skel) in enumerate(zip(frame.images, skeletons))
        ]
    synthesized = [synthesizer(b) for b in rgb_bundles]
    new_images = split_views(synthesized[0], len(ep.cameras)) if tiled else synthesized

    if mode == "rgb":
        return rgb_bundles, new_images, None

    colormaps = [encode_depth_colormap(d, *depth_range) for d in frame.depths]
    if tiled:
        depth_bundles = [
            ConditioningBundle(
                camera="tiled",
                source=tile_views(colormaps),
                skeleton=rgb_bundles[0].skeleton,
                target_rgb=synthesized[0],
                **meta,
            )
        ]
    else:
        depth_bundles = [
            ConditioningBundle(
                camera=f"cam{c}", source=cmap, skeleton=skel, target_rgb=out, **meta
            )
            for c, (cmap, skel, out) in enumerate(zip(colormaps, skeletons, synthesized))
        ]
    return depth_bundles, new_images, new_depths


def augment_episode(
    ep: Episode,
    seg: dict[str, ContactSegmentation],
    sampler: FrameSampler,
    renderer: SkeletonRenderer,
    synthesizer=None,
    k: int = 8,
    seed: int = 0,
    mode: str = "rgb",
    tiling: bool = False,
    depth_range: tuple[float, float] = DEFAULT_DEPTH_RANGE,
) -> AugmentOutcome:
    """Duplicate an episode, replacing state every k timesteps.

    Per replaced frame: a perturbation is sampled (phase-dependent strategy),
    the skeleton of the relabeled pose is rendered per camera, the synthesizer
    produces the new images, and the action is replaced by the relabeled joint
    vectors. Gripper, joint-state, and torque channels pass through. Frames
    whose sampling or synthesis fails stay unmodified and are reported.
    """
    for arm in ARMS:
        if len(seg[arm].labels) != ep.length:
            raise ValueError("segmentation length does not match episode")
    if mode not in ("rgb", "rgbd"):
        raise ValueError(f"unknown mode: {mode}")
    synthesizer = synthesizer or overlay_synthesizer
    aug = ep.copy()
    bundles: list[ConditioningBundle] = []
    replaced: list[int] = []
    failed: list[dict] = []
    records: list[dict] = []
    ep_id = ep.seed_id()
    for t in replacement_indices(ep.length, k):
        frame = aug.frames[t]
        rng = np.random.default_rng((seed, ep_id, t))
        is_contact = contact_at(seg, t)
        phase = "contact" if is_contact else "contactless"
        try:
            pert = sampler.sample({arm: frame.action[arm] for arm in ARMS}, is_contact, rng)
        except SamplingFailed as e:
            failed.append({"t": t, "reason": str(e)})
            records.append(
                {"episode": ep.name, "frame": t, "phase": phase, "status": "failed", "reason": str(e)}
            )
            continue
        renders = [renderer(pert.joints[LEFT], pert.joints[RIGHT], cam) for cam in ep.cameras]
        try:
            frame_bundles, new_images, new_depths = _frame_bundles(
                ep, frame, pert, renders, synthesizer, mode, tiling, depth_range
            )
        except ValueError:
            raise  # structural mismatch is a caller error, not a frame skip
        except Exception as e:  # synthesizer failures keep the frame unmodified
            failed.append({"t": t, "reason": f"synthesizer: {e}"})
            records.append(
                {
                    "episode": ep.name,
                    "frame": t,
                    "phase": phase,
                    "status": "failed",
                    "reason": f"synthesizer: {e}",
                }
            )
            continue
        frame.images = new_images
        if new_depths is not None:
            frame.depths = new_depths
        frame.action = {arm: pert.joints[arm].copy() for arm in ARMS}
        bundles.extend(frame_bundles)
        replaced.append(t)
        records.append(
            {
                "episode": ep.name,
                "frame": t,
                "phase": phase,
                "status": "accepted",
                "delta": _delta_dict(pert.deltas),
            }
        )
    return AugmentOutcome(episode=aug, bundles=bundles, replaced=replaced, failed=failed, records=records)


# ---------------------------------------------------------------------------
# Bundle export
# ---------------------------------------------------------------------------

def export_bundles(bundles: list[ConditioningBundle], out_dir, side: int | None = None) -> dict:
    """Write per-bundle PNGs plus a deterministic JSON manifest.

    Files are named {episode}_{frame:06d}_{camera}_{kind}.png; `side` applies
    the zero-pad + rescale convention to every written image. Returns the
    manifest dict (also written to manifest.json).
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OSError(f"cannot create bundle directory {out}: {e}") from e
    entries = []
    for b in sorted(bundles, key=lambda b: (b.episode, b.frame, b.camera)):
        stem = f"{b.episode}_{b.frame:06d}_{b.camera}"
        files = {}
        images = {"source": b.source, "skeleton": b.skeleton}
        if b.target_rgb is not None:
            images["target"] = b.target_rgb
        for kind, img in images.items():
            if side is not None:
                img = pad_and_rescale(img, side)
            name = f"{stem}_{kind}.png"
            path = out / name
            try:
                save_png(img, path)
            except OSError as e:
                raise OSError(f"failed writing {path}: {e}") from e
            files[kind] = name
        entries.append(
            {
                "episode": b.episode,
                "frame": b.frame,
                "camera": b.camera,
                "files": files,
                "action": {arm: [float(x) for x in b.action[arm]] for arm in ARMS},
                "delta": _delta_dict(b.delta),
                "phase": b.phase,
                "goal": b.goal,
            }
        )
    manifest = {"bundles": entries}
    path = out / "manifest.json"
    try:
        with open(path, "w") as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
    except OSError as e:
        raise OSError(f"failed writing {path}: {e}") from e
    return manifest


# ---------------------------------------------------------------------------
# Dataset-level orchestration
# ---------------------------------------------------------------------------

def augment_dataset(cfg, jobs: int = 1) -> dict:
    """Augment every episode of cfg.dataset_in into cfg.dataset_out.

    Writes mirrored episode directories with an `augmentation.json` marker,
    the resolved config copy, a JSON-lines audit log, and the bundle export.
    Episode outputs are independent, so `jobs` workers may run concurrently
    without affecting the (seed-derived) results.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .episode import list_episode_dirs, load_episode, save_episode

    chains = cfg.load_chains()
    sampler = FrameSampler(chains, cfg.perturbation, cfg.annealing, cfg.ik)
    renderer = SkeletonRenderer(chains, cfg.style)
    out_root = Path(cfg.dataset_out)
    try:
        out_root.mkdir(parents=True, exist_ok=True)
        probe = out_root / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as e:
        raise OSError(f"output directory not writable: {out_root}: {e}") from e
    with open(out_root / "config.json", "w") as f:
        json.dump(cfg.resolved_dict(), f, indent=2, sort_keys=True)

    def process(ep_dir: Path) -> AugmentOutcome:
        ep = load_episode(ep_dir)
        seg = segment_episode(ep, cfg.contact)
        outcome = augment_episode(
            ep, seg, sampler, renderer, None,
            k=cfg.k, seed=cfg.seed, mode=cfg.mode, tiling=cfg.tiling, depth_range=cfg.depth_range,
        )
        save_episode(outcome.episode, out_root / ep.name, depth_range=cfg.depth_range)
        marker = {
            "k": cfg.k,
            "seed": cfg.seed,
            "mode": cfg.mode,
            "tiling": cfg.tiling,
            "replaced": [r for r in outcome.records if r["status"] == "accepted"],
            "failed": outcome.failed,
        }
        with open(out_root / ep.name / "augmentation.json", "w") as f:
            json.dump(marker, f, indent=2, sort_keys=True)
        return outcome

    ep_dirs = list_episode_dirs(cfg.dataset_in)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(process, ep_dirs))
    else:
        outcomes = [process(d) for d in ep_dirs]

    bundles = [b for o in outcomes for b in o.bundles]
    export_bundles(bundles, cfg.bundles_out, cfg.export_side)
    records = sorted(
        (r for o in outcomes for r in o.records), key=lambda r: (r["episode"], r["frame"])
    )
    with open(out_root / "audit.jsonl", "w") as f:
        for r in records:
            f.write(json.dumps(r, sort_keys=True) + "\n")
    return {
        "episodes": len(outcomes),
        "frames_replaced": sum(len(o.replaced) for o in outcomes),
        "sampling_failed": sum(len(o.failed) for o in outcomes),
        "bundles": len(bundles),
    }


def rebuild_bundles(cfg) -> list[ConditioningBundle]:
    """Reconstruct conditioning bundles from an augmented dataset on disk.

    Uses each episode's augmentation.json marker: the source images come from
    cfg.dataset_in, the skeleton is re-rendered from the stored relabeled
    action, so the result is byte-identical to the augment-time export.
    """
    from .episode import list_episode_dirs, load_episode
    from .sampler import ArmPerturbation
    from .kinematics import fk_eef

    chains = cfg.load_chains()
    renderer = SkeletonRenderer(chains, cfg.style)
    bundles: list[ConditioningBundle] = []
    for ep_dir in list_episode_dirs(cfg.dataset_out):
        marker_path = ep_dir / "augmentation.json"
        if not marker_path.is_file():
            continue
        with open(marker_path) as f:
            marker = json.load(f)
        aug_ep = load_episode(ep_dir)
        src_ep = load_episode(Path(cfg.dataset_in) / ep_dir.name)
        for record in marker["replaced"]:
            t = record["frame"]
            aug_frame = aug_ep.frames[t]
            pert = FramePerturbation(
                phase=record["phase"],
                arms={
                    arm: ArmPerturbation(
                        delta=SE3Pose.from_dict(record["delta"][arm]),
                        joints=aug_frame.action[arm],
                        target=fk_eef(chains[arm], aug_frame.action[arm]),
                    )
                    for arm in ARMS
                },
            )
            renders = [
                renderer(aug_frame.action[LEFT], aug_frame.action[RIGHT], cam)
                for cam in src_ep.cameras
            ]
            frame_bundles, _, _ = _frame_bundles(
                src_ep, src_ep.frames[t], pert, renders, overlay_synthesizer,
                cfg.mode, cfg.tiling, cfg.depth_range,
            )
            bundles.extend(frame_bundles)
    return bundles


def _file_bytes_equal(a: Path, b: Path) -> bool:
    return a.read_bytes() == b.read_bytes()


def validate_dataset(
    dataset_dir,
    chains: dict[str, KinematicChain] | None = None,
    source_dir=None,
    style: StyleConfig | None = None,
    alignment_tol_px: float = 1.0,
) -> list[str]:
    """Structural + augmentation invariant checks; returns violation strings.

    For episodes carrying an augmentation.json marker and a source dataset to
    compare against, verifies locality (non-replaced frames byte-identical)
    and label-image consistency (the skeleton rendered from the stored
    relabeled action projects its joint centers within alignment_tol_px of
    the analytic FK projections).
    """
    from .episode import list_episode_dirs, load_episode, validate_episode_structure
    from .renderer import sphere_center_alignment

    problems: list[str] = []
    for ep_dir in list_episode_dirs(dataset_dir):
        ep = load_episode(ep_dir)
        problems += validate_episode_structure(ep, chains)
        marker_path = ep_dir / "augmentation.json"
        if not marker_path.is_file():
            continue
        with open(marker_path) as f:
            marker = json.load(f)
        replaced = {r["frame"] for r in marker["replaced"]}
        if source_dir is not None:
            src_dir = Path(source_dir) / ep.name
            if not (src_dir / "episode.json").is_file():
                problems.append(f"{ep.name}: source episode missing for locality check")
            else:
                problems += _locality_violations(src_dir, ep_dir, ep, replaced)
        if chains is not None:
            style = style or StyleConfig()
            for t in sorted(replaced):
                frame = ep.frames[t]
                scene = build_skeleton_scene(
                    chains[LEFT], chains[RIGHT], frame.action[LEFT], frame.action[RIGHT], style
                )
                for cam_idx, cam in enumerate(ep.cameras):
                    errs = [
                        e for e in sphere_center_alignment(scene, cam) if e is not None
                    ]
                    if not errs:
                        continue
                    worst = max(errs)
                    if worst > alignment_tol_px:
                        problems.append(
                            f"{ep.name}[t={t}] cam{cam_idx}: skeleton/label misalignment "
                            f"{worst:.2f}px > {alignment_tol_px}px"
                        )
    return problems


def _locality_violations(src_dir: Path, aug_dir: Path, ep: Episode, replaced: set[int]) -> list[str]:
    problems = []
    with open(src_dir / "frames.jsonl") as f:
        src_lines = [line for line in f if line.strip()]
    with open(aug_dir / "frames.jsonl") as f:
        aug_lines = [line for line in f if line.strip()]
    if len(src_lines) != len(aug_lines):
        return [f"{ep.name}: frame count changed ({len(src_lines)} -> {len(aug_lines)})"]
    for t, (a, b) in enumerate(zip(src_lines, aug_lines)):
        if t not in replaced and a != b:
            problems.append(f"{ep.name}[t={t}]: state modified outside replacement indices")
    kinds = ["rgb"] + (["depth"] if ep.has_depth else [])
    for t in range(ep.length):
        if t in replaced:
            continue
        for kind in kinds:
            for c in range(len(ep.cameras)):
                rel = Path(kind) / f"cam{c}_{t:06d}.png"
                if not _file_bytes_equal(src_dir / rel, aug_dir / rel):
                    problems.append(f"{ep.name}[t={t}]: {rel} modified outside replacement indices")
    return problems
