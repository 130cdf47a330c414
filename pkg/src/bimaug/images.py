"""8-bit image buffers, float depth maps, PNG persistence, depth colormap, tiling.

ImageBuffer is a thin row-major uint8 container (1, 3, or 6 channels; 6-channel
buffers are two stacked RGB planes and exist only in memory). DepthMap stores
float32 meters with +inf marking background pixels.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

DEPTH_INF_CODE = 65535  # 16-bit PNG sentinel for the +inf background


@dataclass
class ImageBuffer:
    width: int
    height: int
    channels: int
    data: np.ndarray  # shape (height, width, channels), uint8

    def __post_init__(self):
        if self.channels not in (1, 3, 6):
            raise ValueError(f"unsupported channel count: {self.channels}")
        self.data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if self.data.shape != (self.height, self.width, self.channels):
            raise ValueError(
                f"buffer shape {self.data.shape} != {(self.height, self.width, self.channels)}"
            )

    @staticmethod
    def zeros(width: int, height: int, channels: int = 3) -> "ImageBuffer":
        return ImageBuffer(width, height, channels, np.zeros((height, width, channels), np.uint8))

    @staticmethod
    def from_array(arr: np.ndarray) -> "ImageBuffer":
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        h, w, c = arr.shape
        return ImageBuffer(w, h, c, arr.astype(np.uint8))

    def copy(self) -> "ImageBuffer":
        return ImageBuffer(self.width, self.height, self.channels, self.data.copy())

    def planes(self) -> list["ImageBuffer"]:
        """Split a 6-channel buffer into its two RGB planes."""
        if self.channels != 6:
            raise ValueError("planes() is only defined for 6-channel buffers")
        return [
            ImageBuffer(self.width, self.height, 3, self.data[:, :, :3].copy()),
            ImageBuffer(self.width, self.height, 3, self.data[:, :, 3:].copy()),
        ]


def stack_planes(first: ImageBuffer, second: ImageBuffer) -> ImageBuffer:
    """Concatenate two RGB images into one 6-channel buffer (first then second)."""
    if first.channels != 3 or second.channels != 3:
        raise ValueError("6-channel stacking needs two RGB inputs")
    if (first.width, first.height) != (second.width, second.height):
        raise ValueError("plane dimensions differ")
    return ImageBuffer(
        first.width, first.height, 6, np.concatenate([first.data, second.data], axis=2)
    )


@dataclass
class DepthMap:
    width: int
    height: int
    data: np.ndarray  # shape (height, width), float32, +inf = background

    def __post_init__(self):
        self.data = np.ascontiguousarray(self.data, dtype=np.float32)
        if self.data.shape != (self.height, self.width):
            raise ValueError(f"depth shape {self.data.shape} != {(self.height, self.width)}")
        finite = self.data[np.isfinite(self.data)]
        if finite.size and not np.all(finite > 0):
            raise ValueError("finite depth values must be positive")

    @staticmethod
    def background(width: int, height: int) -> "DepthMap":
        return DepthMap(width, height, np.full((height, width), np.inf, np.float32))

    def copy(self) -> "DepthMap":
        return DepthMap(self.width, self.height, self.data.copy())


# ---------------------------------------------------------------------------
# PNG persistence
# ---------------------------------------------------------------------------

def save_png(img: ImageBuffer, path) -> None:
    if img.channels == 6:
        raise ValueError("6-channel buffers have no PNG encoding; save the planes")
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    Image.fromarray(arr, mode="L" if img.channels == 1 else "RGB").save(path, format="PNG")


def load_png(path) -> ImageBuffer:
    with Image.open(path) as im:
        im = im.convert("RGB") if im.mode not in ("L", "RGB") else im
        arr = np.asarray(im, dtype=np.uint8)
    return ImageBuffer.from_array(arr)


def save_depth_png(depth: DepthMap, path, d_min: float, d_max: float) -> None:
    """16-bit PNG: codes 0..65534 span [d_min, d_max] linearly, 65535 = +inf.

    The linear scale is recorded in a `<path>.json` sidecar {d_min, d_max}.
    """
    if not (math.isfinite(d_min) and math.isfinite(d_max)) or not d_min < d_max:
        raise ValueError("need finite d_min < d_max")
    d = depth.data
    finite = np.isfinite(d)
    scaled = np.zeros(d.shape, np.float64)
    scaled[finite] = np.clip((d[finite] - d_min) / (d_max - d_min), 0.0, 1.0)
    codes = np.rint(scaled * (DEPTH_INF_CODE - 1)).astype(np.uint16)
    codes[~finite] = DEPTH_INF_CODE
    Image.fromarray(codes).save(path, format="PNG")  # uint16 -> 16-bit grayscale
    with open(str(path) + ".json", "w") as f:
        json.dump({"d_min": float(d_min), "d_max": float(d_max)}, f, sort_keys=True)


def load_depth_png(path) -> DepthMap:
    with open(str(path) + ".json") as f:
        scale = json.load(f)
    d_min, d_max = float(scale["d_min"]), float(scale["d_max"])
    with Image.open(path) as im:
        codes = np.asarray(im, dtype=np.uint16)
    data = d_min + codes.astype(np.float32) / (DEPTH_INF_CODE - 1) * (d_max - d_min)
    data[codes == DEPTH_INF_CODE] = np.inf
    h, w = data.shape
    return DepthMap(w, h, data)


# ---------------------------------------------------------------------------
# Depth colormap
# ---------------------------------------------------------------------------
# Fixed 256-entry monotone blue->red lookup: entry i = (r=i, g=0, b=255-i).
# Monotone in r (and anti-monotone in b), hence injective and invertible by
# reading back the red channel. Entry 0 encodes d_min, entry 255 d_max, and
# the +inf background also maps to entry 255.

DEPTH_COLORMAP = np.stack(
    [np.arange(256, dtype=np.uint8), np.zeros(256, np.uint8), np.arange(255, -1, -1, dtype=np.uint8)],
    axis=1,
)


def encode_depth_colormap(depth: DepthMap, d_min: float, d_max: float) -> ImageBuffer:
    """Color-code a depth map through the fixed blue->red lookup table."""
    if not (math.isfinite(d_min) and math.isfinite(d_max)):
        raise ValueError("colormap bounds must be finite")
    if not d_min < d_max:
        raise ValueError("need d_min < d_max")
    d = depth.data
    finite = np.isfinite(d)
    idx = np.full(d.shape, 255, np.int64)
    frac = np.clip((d[finite] - d_min) / (d_max - d_min), 0.0, 1.0)
    idx[finite] = np.rint(frac * 255).astype(np.int64)
    return ImageBuffer(depth.width, depth.height, 3, DEPTH_COLORMAP[idx])


def decode_depth_colormap(img: ImageBuffer, d_min: float, d_max: float) -> np.ndarray:
    """Invert encode_depth_colormap; returns float32 meters (entry 255 -> d_max)."""
    if img.channels != 3:
        raise ValueError("expected an RGB colormap image")
    idx = img.data[:, :, 0].astype(np.float32)  # red channel == table index
    return (d_min + idx / 255.0 * (d_max - d_min)).astype(np.float32)


# ---------------------------------------------------------------------------
# Multi-view tiling
# ---------------------------------------------------------------------------

def tile_views(views: list[ImageBuffer]) -> ImageBuffer:
    """2x2 row-major composite of up to four equally sized views.

    View i occupies the quadrant with top-left corner
    (x, y) = ((i % 2) * W, (i // 2) * H); missing cells stay black.
    """
    if not 1 <= len(views) <= 4:
        raise ValueError("tile_views takes 1..4 views")
    w, h, c = views[0].width, views[0].height, views[0].channels
    for v in views[1:]:
        if (v.width, v.height, v.channels) != (w, h, c):
            raise ValueError("all views must share dimensions and channel count")
    out = np.zeros((2 * h, 2 * w, c), np.uint8)
    for i, v in enumerate(views):
        y0, x0 = (i // 2) * h, (i % 2) * w
        out[y0 : y0 + h, x0 : x0 + w] = v.data
    return ImageBuffer(2 * w, 2 * h, c, out)


def split_views(composite: ImageBuffer, count: int) -> list[ImageBuffer]:
    """Inverse of tile_views for the first `count` quadrants."""
    if not 1 <= count <= 4:
        raise ValueError("count must be 1..4")
    if composite.width % 2 or composite.height % 2:
        raise ValueError("composite dimensions must be even")
    w, h = composite.width // 2, composite.height // 2
    out = []
    for i in range(count):
        y0, x0 = (i // 2) * h, (i % 2) * w
        out.append(
            ImageBuffer(w, h, composite.channels, composite.data[y0 : y0 + h, x0 : x0 + w].copy())
        )
    return out
