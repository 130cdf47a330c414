"""Offline data augmentation for eye-to-hand bimanual imitation-learning datasets."""

from .se3 import SE3Pose, compose, inverse, perturbed_pose, pose_difference
from .kinematics import (
    IkConfig,
    Joint,
    KinematicChain,
    apply_eef_perturbation,
    fk_eef,
    forward_kinematics,
    solve_ik_lm,
)
from .camera import CameraModel, pad_and_rescale, project, unproject
from .images import (
    DepthMap,
    ImageBuffer,
    decode_depth_colormap,
    encode_depth_colormap,
    load_depth_png,
    load_png,
    save_depth_png,
    save_png,
    split_views,
    tile_views,
)
from .renderer import SkeletonScene, StyleConfig, build_skeleton_scene, render_skeleton
from .contact import (
    CONTACT,
    CONTACTLESS,
    ArModel,
    ContactConfig,
    ContactSegmentation,
    fit_ar_model,
    segment_contacts,
)
from .annealing import AnnealConfig, AnnealResult, dual_annealing
from .sampler import (
    FramePerturbation,
    FrameSampler,
    PerturbationConfig,
    SamplingFailed,
    cost,
    sample_contact_rich,
    sample_contactless,
)
from .episode import Episode, Frame, list_episode_dirs, load_episode, save_episode
from .pipeline import (
    ConditioningBundle,
    SkeletonRenderer,
    augment_dataset,
    augment_episode,
    export_bundles,
    overlay_synthesizer,
    replacement_indices,
    segment_episode,
    validate_dataset,
)
from .config import PipelineConfig, load_config

__version__ = "0.1.0"
