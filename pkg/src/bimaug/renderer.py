"""Software rasterizer for skeleton pose images.

Bones are capped cylinders in flat arm color; joints are spheres carrying
longitudinal stripe bands whose phase follows the joint angle. Rendering is a
per-pixel analytic ray intersection against every primitive with a z-buffer.
No tessellation is involved, so small-scene output can be checked against a
brute-force oracle exactly.

Shading rule for striped spheres (shared contract with any oracle): with hit
point p expressed in the sphere's local frame, axis a the stripe axis, basis
e1 = normalize(ref - (ref.a)a) where ref is (1,0,0) unless |a_x| > 0.9 else
(0,1,0), and e2 = a x e1, the azimuth is phi = atan2(p.e2, p.e1) + phase. Band
index floor(phi mod 2pi / (2pi/n)); even bands take the arm color, odd bands
the stripe color.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import CameraModel
from .images import DepthMap, ImageBuffer
from .kinematics import KinematicChain, forward_kinematics
from .se3 import SE3Pose

_EPS = 1e-9


@dataclass
class StyleConfig:
    sphere_radius: float = 0.035
    cylinder_radius: float = 0.015
    stripe_count: int = 8
    left_color: tuple[int, int, int] = (204, 36, 36)
    right_color: tuple[int, int, int] = (36, 66, 204)
    stripe_color: tuple[int, int, int] = (255, 255, 255)

    def to_dict(self) -> dict:
        return {
            "sphere_radius": self.sphere_radius,
            "cylinder_radius": self.cylinder_radius,
            "stripe_count": self.stripe_count,
            "left_color": list(self.left_color),
            "right_color": list(self.right_color),
            "stripe_color": list(self.stripe_color),
        }

    @staticmethod
    def from_dict(d: dict) -> "StyleConfig":
        cfg = StyleConfig()
        for k in ("sphere_radius", "cylinder_radius", "stripe_count"):
            if k in d:
                setattr(cfg, k, type(getattr(cfg, k))(d[k]))
        for k in ("left_color", "right_color", "stripe_color"):
            if k in d:
                setattr(cfg, k, tuple(int(v) for v in d[k]))
        return cfg


@dataclass
class StripedSphere:
    center: np.ndarray        # world, meters
    rotation: np.ndarray      # 3x3 world-from-local
    stripe_axis: np.ndarray   # unit vector, local frame
    phase: float              # radians added to the azimuth
    radius: float
    color: tuple[int, int, int]
    stripe_color: tuple[int, int, int]
    stripe_count: int


@dataclass
class Cylinder:
    p0: np.ndarray  # world endpoints, meters
    p1: np.ndarray
    radius: float
    color: tuple[int, int, int]


@dataclass
class SkeletonScene:
    spheres: list[StripedSphere] = field(default_factory=list)
    cylinders: list[Cylinder] = field(default_factory=list)

    @property
    def primitive_count(self) -> int:
        return len(self.spheres) + len(self.cylinders)


def stripe_basis(axis: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis perpendicular to the stripe axis."""
    ref = np.array([1.0, 0.0, 0.0]) if abs(axis[0]) <= 0.9 else np.array([0.0, 1.0, 0.0])
    e1 = ref - np.dot(ref, axis) * axis
    e1 = e1 / np.linalg.norm(e1)
    e2 = np.cross(axis, e1)
    return e1, e2


def _arm_geometry(
    chain: KinematicChain, q, color: tuple[int, int, int], style: StyleConfig
) -> tuple[list[StripedSphere], list[Cylinder]]:
    frames = forward_kinematics(chain, q)
    q = chain.check_q(q)
    poses = [chain.base_pose] + frames
    spheres = []
    for j, pose in enumerate(poses):
        if j < chain.dof:
            stripe_axis = chain.joints[j].axis.copy()
            phase = float(q[j])
        else:
            stripe_axis = np.array([0.0, 0.0, 1.0])
            phase = 0.0
        spheres.append(
            StripedSphere(
                center=pose.trans.copy(),
                rotation=pose.rotation_matrix(),
                stripe_axis=stripe_axis,
                phase=phase,
                radius=style.sphere_radius,
                color=color,
                stripe_color=style.stripe_color,
                stripe_count=style.stripe_count,
            )
        )
    cylinders = [
        Cylinder(
            p0=poses[j].trans.copy(),
            p1=poses[j + 1].trans.copy(),
            radius=style.cylinder_radius,
            color=color,
        )
        for j in range(len(poses) - 1)
    ]
    return spheres, cylinders


def build_skeleton_scene(
    chain_left: KinematicChain,
    chain_right: KinematicChain | None,
    q_left,
    q_right=None,
    style: StyleConfig | None = None,
) -> SkeletonScene:
    """Assemble both arms' joint spheres and bone cylinders in world frame.

    chain_right may be None for single-arm scenes (then q_right is ignored).
    """
    style = style or StyleConfig()
    scene = SkeletonScene()
    s, c = _arm_geometry(chain_left, q_left, style.left_color, style)
    scene.spheres += s
    scene.cylinders += c
    if chain_right is not None:
        s, c = _arm_geometry(chain_right, q_right, style.right_color, style)
        scene.spheres += s
        scene.cylinders += c
    return scene


# ---------------------------------------------------------------------------
# Rasterization
# ---------------------------------------------------------------------------

def _pixel_dirs(cam: CameraModel) -> np.ndarray:
    """Camera-frame ray directions with d_z = 1, so ray parameter == z depth."""
    us = np.arange(cam.width, dtype=np.float64)
    vs = np.arange(cam.height, dtype=np.float64)
    du = (us - cam.cx) / cam.fx
    dv = (vs - cam.cy) / cam.fy
    dirs = np.empty((cam.height, cam.width, 3))
    dirs[:, :, 0] = du[None, :]
    dirs[:, :, 1] = dv[:, None]
    dirs[:, :, 2] = 1.0
    return dirs


def _sphere_hits(dirs: np.ndarray, center_cam: np.ndarray, radius: float) -> np.ndarray:
    """Per-pixel z of the nearest forward intersection; +inf where missed."""
    a = np.einsum("hwc,hwc->hw", dirs, dirs)
    b = -2.0 * (dirs @ center_cam)
    c0 = float(center_cam @ center_cam) - radius * radius
    disc = b * b - 4.0 * a * c0
    hit = disc >= 0.0
    sq = np.sqrt(np.where(hit, disc, 0.0))
    t1 = (-b - sq) / (2.0 * a)
    t2 = (-b + sq) / (2.0 * a)
    t = np.where(t1 > _EPS, t1, np.where(t2 > _EPS, t2, np.inf))
    return np.where(hit, t, np.inf)


def _cylinder_hits(
    dirs: np.ndarray, p0_cam: np.ndarray, p1_cam: np.ndarray, radius: float
) -> np.ndarray:
    """Nearest forward intersection z with a finite capped cylinder; +inf = miss."""
    axis = p1_cam - p0_cam
    length = float(np.linalg.norm(axis))
    t_best = np.full(dirs.shape[:2], np.inf)
    if length < _EPS:
        return t_best
    u = axis / length
    oc = -p0_cam  # ray origin is the camera origin
    du_ = dirs @ u
    oc_u = float(oc @ u)
    a = np.einsum("hwc,hwc->hw", dirs, dirs) - du_ * du_
    b = 2.0 * (dirs @ oc - oc_u * du_)
    c0 = float(oc @ oc) - oc_u * oc_u - radius * radius
    disc = b * b - 4.0 * a * c0
    quad = (disc >= 0.0) & (a > _EPS)
    sq = np.sqrt(np.where(quad, disc, 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        for sign in (-1.0, 1.0):
            t = (-b + sign * sq) / (2.0 * a)
            s = t * du_ + oc_u  # axial coordinate of the hit: (t*d - p0).u
            ok = quad & (t > _EPS) & (s >= 0.0) & (s <= length) & (t < t_best)
            t_best = np.where(ok, t, t_best)
    # end caps
    denom = du_
    for p_cap, s_cap in ((p0_cam, 0.0), (p1_cam, length)):
        with np.errstate(divide="ignore", invalid="ignore"):
            t = np.where(np.abs(denom) > _EPS, (float(p_cap @ u)) / denom, np.inf)
        x = dirs * t[:, :, None] - p_cap
        radial2 = np.einsum("hwc,hwc->hw", x, x) - (np.einsum("hwc,c->hw", x, u)) ** 2
        ok = (t > _EPS) & (radial2 <= radius * radius) & (t < t_best)
        t_best = np.where(ok, t, t_best)
    return t_best


def _sphere_colors(
    sphere: StripedSphere, dirs: np.ndarray, t: np.ndarray, mask: np.ndarray, cam_pose: SE3Pose
) -> np.ndarray:
    """Stripe shading for masked pixels; returns (n, 3) uint8."""
    hits_cam = dirs[mask] * t[mask][:, None]
    R_wc = cam_pose.rotation_matrix()
    local = (hits_cam @ R_wc.T + (cam_pose.trans - sphere.center)) @ sphere.rotation
    e1, e2 = stripe_basis(sphere.stripe_axis)
    phi = np.arctan2(local @ e2, local @ e1) + sphere.phase
    band = np.floor(np.mod(phi, 2.0 * np.pi) / (2.0 * np.pi / sphere.stripe_count)).astype(int)
    band = np.clip(band, 0, sphere.stripe_count - 1)
    colors = np.where(
        (band % 2 == 0)[:, None],
        np.array(sphere.color, np.uint8)[None, :],
        np.array(sphere.stripe_color, np.uint8)[None, :],
    )
    return colors.astype(np.uint8)


def render_skeleton(scene: SkeletonScene, cam: CameraModel) -> tuple[ImageBuffer, DepthMap]:
    """Z-buffered perspective render at cam.width x cam.height.

    Background is solid black with +inf depth; nearer primitives occlude
    farther ones; depth is camera-frame z in meters.
    """
    dirs = _pixel_dirs(cam)
    zbuf = np.full((cam.height, cam.width), np.inf)
    color = np.zeros((cam.height, cam.width, 3), np.uint8)
    world_to_cam = cam.extrinsics.inverse()
    R = world_to_cam.rotation_matrix()
    t = world_to_cam.trans

    for sphere in scene.spheres:
        c_cam = R @ sphere.center + t
        tz = _sphere_hits(dirs, c_cam, sphere.radius)
        mask = tz < zbuf
        if mask.any():
            color[mask] = _sphere_colors(sphere, dirs, tz, mask, cam.extrinsics)
            zbuf[mask] = tz[mask]
    for cyl in scene.cylinders:
        tz = _cylinder_hits(dirs, R @ cyl.p0 + t, R @ cyl.p1 + t, cyl.radius)
        mask = tz < zbuf
        if mask.any():
            color[mask] = np.array(cyl.color, np.uint8)
            zbuf[mask] = tz[mask]

    img = ImageBuffer(cam.width, cam.height, 3, color)
    depth = DepthMap(cam.width, cam.height, zbuf.astype(np.float32))
    return img, depth


def sphere_center_alignment(scene: SkeletonScene, cam: CameraModel) -> list[float | None]:
    """Pixel distance between each joint sphere's rendered center and the
    analytic projection of its world center.

    Each sphere is rendered in isolation and located by the centroid of its
    lit pixels. Spheres behind the camera or not fully inside the frame yield
    None (their centroid would be clipped).
    """
    from .camera import project

    errors: list[float | None] = []
    for sphere in scene.spheres:
        proj = project(cam, sphere.center)
        if proj is None:
            errors.append(None)
            continue
        u, v, z = proj
        pixel_radius = max(cam.fx, cam.fy) * sphere.radius / z + 1.0
        if not (
            pixel_radius <= u <= cam.width - 1 - pixel_radius
            and pixel_radius <= v <= cam.height - 1 - pixel_radius
        ):
            errors.append(None)
            continue
        img, _ = render_skeleton(SkeletonScene(spheres=[sphere]), cam)
        mask = np.any(img.data != 0, axis=2)
        if not mask.any():
            errors.append(None)
            continue
        vs, us = np.nonzero(mask)
        errors.append(float(np.hypot(us.mean() - u, vs.mean() - v)))
    return errors
