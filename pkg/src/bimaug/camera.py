"""Ideal pinhole camera matching the source capture, plus image-shape helpers.

Conventions shared with the rasterizer: the camera looks along +z of its own
frame, +x right, +y down; integer (u, v) coordinates are pixel CENTERS, so the
principal point (cx, cy) lands exactly on a pixel when it is integral. No lens
distortion model.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .images import ImageBuffer
from .se3 import SE3Pose


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics (pixels) plus extrinsics (camera pose in world frame)."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int
    extrinsics: SE3Pose = field(default_factory=SE3Pose.identity)

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError("principal point must lie inside the image")

    def world_to_camera(self, p_world) -> np.ndarray:
        return self.extrinsics.inverse().apply(p_world)

    def camera_to_world(self, p_cam) -> np.ndarray:
        return self.extrinsics.apply(p_cam)

    def to_dict(self) -> dict:
        return {
            "fx": self.fx,
            "fy": self.fy,
            "cx": self.cx,
            "cy": self.cy,
            "width": self.width,
            "height": self.height,
            "extrinsics": self.extrinsics.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "CameraModel":
        return CameraModel(
            fx=float(d["fx"]),
            fy=float(d["fy"]),
            cx=float(d["cx"]),
            cy=float(d["cy"]),
            width=int(d["width"]),
            height=int(d["height"]),
            extrinsics=SE3Pose.from_dict(d["extrinsics"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)

    @staticmethod
    def load(path) -> "CameraModel":
        with open(path) as f:
            return CameraModel.from_dict(json.load(f))


def project(cam: CameraModel, p_world):
    """Pinhole projection of a world point.

    Returns (u, v, depth) with depth the camera-frame z in meters, or None when
    the point is at or behind the camera plane (z <= 0).
    """
    p = np.asarray(p_world, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite point")
    pc = cam.world_to_camera(p)
    z = float(pc[2])
    if z <= 0.0:
        return None
    u = cam.fx * pc[0] / z + cam.cx
    v = cam.fy * pc[1] / z + cam.cy
    return float(u), float(v), z


def unproject(cam: CameraModel, u: float, v: float, depth: float) -> np.ndarray:
    """World point whose projection is (u, v) at the given camera-frame depth."""
    if depth <= 0:
        raise ValueError("depth must be positive")
    x = (u - cam.cx) / cam.fx * depth
    y = (v - cam.cy) / cam.fy * depth
    return cam.camera_to_world(np.array([x, y, depth]))


def look_at_extrinsics(eye, target, up=(0.0, 0.0, 1.0)) -> SE3Pose:
    """Camera pose at `eye` with +z toward `target` (+y chosen to point 'down')."""
    eye = np.asarray(eye, dtype=float)
    fwd = np.asarray(target, dtype=float) - eye
    n = np.linalg.norm(fwd)
    if n < 1e-12:
        raise ValueError("eye and target coincide")
    fwd = fwd / n
    up = np.asarray(up, dtype=float)
    right = np.cross(fwd, up)
    rn = np.linalg.norm(right)
    if rn < 1e-9:
        right = np.cross(fwd, np.array([1.0, 0.0, 0.0]))
        rn = np.linalg.norm(right)
    right = right / rn
    down = np.cross(fwd, right)
    R = np.column_stack([right, down, fwd])
    from .se3 import quat_from_matrix

    return SE3Pose(quat_from_matrix(R), eye)


def _bilinear_resize(arr: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear point-sampled resize with pixel-center alignment."""
    h, w = arr.shape[:2]
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    x0 = np.clip(np.floor(xs), 0, w - 1).astype(np.int64)
    y0 = np.clip(np.floor(ys), 0, h - 1).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
    wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
    a = arr[np.ix_(y0, x0)].astype(np.float64)
    b = arr[np.ix_(y0, x1)].astype(np.float64)
    c = arr[np.ix_(y1, x0)].astype(np.float64)
    d = arr[np.ix_(y1, x1)].astype(np.float64)
    top = a * (1 - wx) + b * wx
    bot = c * (1 - wx) + d * wx
    out = top * (1 - wy) + bot * wy
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def pad_and_rescale(img: ImageBuffer, side: int) -> ImageBuffer:
    """Zero-pad to a square on the long side (split evenly, extra pixel at the
    bottom/right), then bilinearly rescale to side x side."""
    if side <= 0:
        raise ValueError("side must be positive")
    if img.width == 0 or img.height == 0:
        raise ValueError("empty image")
    size = max(img.width, img.height)
    pad_x = size - img.width
    pad_y = size - img.height
    x0, y0 = pad_x // 2, pad_y // 2
    padded = np.zeros((size, size, img.channels), np.uint8)
    padded[y0 : y0 + img.height, x0 : x0 + img.width] = img.data
    if size == side:
        return ImageBuffer(side, side, img.channels, padded)
    return ImageBuffer(side, side, img.channels, _bilinear_resize(padded, side, side))
