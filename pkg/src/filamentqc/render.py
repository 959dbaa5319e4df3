"""Z-buffered point splatting into a color image with a source-index map.

Every selected point is projected through the pose and stamped over its
(2r+1)^2 pixel footprint. A pixel keeps the smallest depth; equal depths
resolve to the smaller point index, which makes the result independent of
point order and execution schedule. The per-pixel index map records which
cloud point won each pixel and is the bridge that later carries 2D instance
labels back to 3D.

Raster side formats:

* index map: magic ``VCIDX1``, uint32-LE width, uint32-LE height, then
  width*height uint32-LE values row-major from the top row; 0xFFFFFFFF marks
  an empty pixel.
* depth map: magic ``VCDPT1``, same layout with float32-LE values; empty
  pixels hold +inf.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from . import kernels
from .camera import Intrinsics, Pose
from .cloud import INTENSITY, RGB, SIGNED_DISTANCE, ColorAttr, PointCloud
from .errors import DataError

EMPTY_PIXEL = np.uint32(0xFFFFFFFF)

_IDX_MAGIC = b"VCIDX1"
_DPT_MAGIC = b"VCDPT1"

HOLE_FILL_MODES = ("none", "close3")


@dataclass(frozen=True)
class SplatConfig:
    radius_px: int = 1
    colormap_range_m: float = 0.005  # symmetric range of the diverging map
    hole_fill: str = "none"

    def __post_init__(self):
        if not (0 <= self.radius_px <= 8):
            raise ValueError("splat radius must be in [0, 8]")
        if self.colormap_range_m <= 0:
            raise ValueError("colormap range must be positive")
        if self.hole_fill not in HOLE_FILL_MODES:
            raise ValueError(f"unknown hole_fill mode {self.hole_fill!r}")


@dataclass(frozen=True)
class RenderBuffer:
    color: np.ndarray  # (h, w, 3) uint8
    depth: np.ndarray  # (h, w) float64, +inf where empty
    index_map: np.ndarray  # (h, w) int64, -1 where empty
    gsd_m: float
    pose: Pose
    intrinsics: Intrinsics

    @property
    def width(self) -> int:
        return self.color.shape[1]

    @property
    def height(self) -> int:
        return self.color.shape[0]


def colorize_value(value, kind: str, cfg: SplatConfig):
    """Map one attribute value to an (r, g, b) tuple."""
    arr = colorize(ColorAttr(kind, np.atleast_1d(value) if kind != RGB
                             else np.asarray(value).reshape(1, 3)), cfg)
    return tuple(int(c) for c in arr[0])


def colorize(attr: ColorAttr, cfg: SplatConfig) -> np.ndarray:
    """Per-point uint8 colors: RGB passthrough, intensity to grayscale,
    signed distance to a blue-white-red diverging ramp clamped at
    +-colormap_range_m."""
    if attr.kind == RGB:
        return np.asarray(attr.values, dtype=np.uint8)
    if attr.kind == INTENSITY:
        gray = np.rint(attr.values * 255.0).astype(np.uint8)
        return np.stack([gray, gray, gray], axis=1)
    if attr.kind == SIGNED_DISTANCE:
        t = np.clip(attr.values / cfg.colormap_range_m, -1.0, 1.0)
        out = np.empty((t.shape[0], 3), dtype=np.float64)
        neg = t < 0
        # -range -> blue, 0 -> white, +range -> red, linear in between
        out[:, 0] = np.where(neg, (1.0 + t) * 255.0, 255.0)
        out[:, 1] = (1.0 - np.abs(t)) * 255.0
        out[:, 2] = np.where(neg, 255.0, (1.0 - t) * 255.0)
        return np.rint(out).astype(np.uint8)
    raise ValueError(f"unknown color kind {attr.kind!r}")


def _close3(color, depth, index_map):
    """3x3 morphological closing of the occupancy; new pixels copy color,
    depth, and index from their nearest-depth occupied 3x3 neighbor."""
    height, width = depth.shape
    occupied = index_map >= 0
    shifts = [(dv, du) for dv in (-1, 0, 1) for du in (-1, 0, 1)]

    def shifted(arr, fill):
        stack = np.full((len(shifts),) + arr.shape, fill, dtype=arr.dtype)
        for k, (dv, du) in enumerate(shifts):
            src = arr[max(0, -dv):height - max(0, dv),
                      max(0, -du):width - max(0, du)]
            stack[k][max(0, dv):height - max(0, -dv),
                     max(0, du):width - max(0, -du)] = src
        return stack

    occ_stack = shifted(occupied.astype(np.uint8), 0)
    dilated = occ_stack.any(axis=0)
    dil_stack = shifted(dilated.astype(np.uint8), 0)
    closed = dil_stack.all(axis=0)
    fill = closed & ~occupied
    if not fill.any():
        return color, depth, index_map

    depth_stack = shifted(np.where(occupied, depth, np.inf), np.inf)
    donor = depth_stack.argmin(axis=0)
    donor_depth = np.take_along_axis(depth_stack, donor[None], axis=0)[0]
    fill &= np.isfinite(donor_depth)

    index_stack = shifted(index_map, -1)
    color_new = color.copy()
    depth_new = depth.copy()
    index_new = index_map.copy()
    depth_new[fill] = donor_depth[fill]
    index_new[fill] = np.take_along_axis(index_stack, donor[None], axis=0)[0][fill]
    for c in range(3):
        chan_stack = shifted(color[:, :, c], 0)
        color_new[:, :, c][fill] = \
            np.take_along_axis(chan_stack, donor[None], axis=0)[0][fill]
    return color_new, depth_new, index_new


def render(cloud: PointCloud, indices: np.ndarray, pose: Pose,
           intr: Intrinsics, cfg: SplatConfig, gsd_m: float,
           _point_chunks: int = 1) -> RenderBuffer:
    """Render the selected cloud points into a new buffer.

    ``_point_chunks`` splits the splat into that many kernel invocations; it
    exists to demonstrate schedule independence and never changes the result.
    """
    idx = np.asarray(indices, dtype=np.int64).reshape(-1)
    if idx.size and (idx.min() < 0 or idx.max() >= len(cloud)):
        raise ValueError("render indices out of cloud range")
    width, height = intr.width_px, intr.height_px
    depth_buf = np.full((height, width), np.inf, dtype=np.float64)
    index_buf = np.full((height, width), -1, dtype=np.int64)

    if idx.size:
        pts = cloud.points[idx]
        p_cam = pts @ pose.rotation.T + pose.translation
        depth = p_cam[:, 2]
        front = depth > 0
        with np.errstate(divide="ignore", invalid="ignore"):
            u = intr.fx * p_cam[:, 0] / depth + intr.cx
            v = intr.fy * p_cam[:, 1] / depth + intr.cy
        px = np.floor(u).astype(np.int64)
        py = np.floor(v).astype(np.int64)
        r = cfg.radius_px
        keep = front & (px >= -r) & (px < width + r) & \
            (py >= -r) & (py < height + r)
        px, py = px[keep], py[keep]
        depth_k = depth[keep]
        idx_k = idx[keep]
        chunks = max(1, int(_point_chunks))
        for lo in range(0, px.size, max(1, -(-px.size // chunks))):
            hi = min(px.size, lo + max(1, -(-px.size // chunks)))
            kernels.splat_zbuffer(px[lo:hi], py[lo:hi], depth_k[lo:hi],
                                  idx_k[lo:hi], r, depth_buf, index_buf)

    palette = colorize(cloud.colors, cfg)
    color = np.zeros((height, width, 3), dtype=np.uint8)
    hit = index_buf >= 0
    color[hit] = palette[index_buf[hit]]

    if cfg.hole_fill == "close3":
        color, depth_buf, index_buf = _close3(color, depth_buf, index_buf)

    for arr in (color, depth_buf, index_buf):
        arr.flags.writeable = False
    return RenderBuffer(color, depth_buf, index_buf, gsd_m, pose, intr)


# ---------------------------------------------------------------------------
# raster I/O
# ---------------------------------------------------------------------------


def write_png(image: np.ndarray, path) -> None:
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(Path(path), "PNG")


def read_png(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise DataError(f"image file does not exist: {path}")
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.uint8)


def write_index_raster(index_map: np.ndarray, path) -> None:
    height, width = index_map.shape
    vals = np.where(index_map >= 0, index_map, 0xFFFFFFFF).astype("<u4")
    with Path(path).open("wb") as fh:
        fh.write(_IDX_MAGIC)
        fh.write(np.array([width, height], dtype="<u4").tobytes())
        fh.write(vals.tobytes())


def read_index_raster(path) -> np.ndarray:
    raw = _read_raster_payload(path, _IDX_MAGIC)
    width, height, body = raw
    vals = np.frombuffer(body, dtype="<u4").reshape(height, width)
    return np.where(vals == EMPTY_PIXEL, -1, vals.astype(np.int64))


def write_depth_raster(depth: np.ndarray, path) -> None:
    height, width = depth.shape
    with Path(path).open("wb") as fh:
        fh.write(_DPT_MAGIC)
        fh.write(np.array([width, height], dtype="<u4").tobytes())
        fh.write(depth.astype("<f4").tobytes())


def read_depth_raster(path) -> np.ndarray:
    width, height, body = _read_raster_payload(path, _DPT_MAGIC)
    return np.frombuffer(body, dtype="<f4").reshape(height, width).astype(np.float64)


def _read_raster_payload(path, magic: bytes):
    path = Path(path)
    if not path.exists():
        raise DataError(f"raster file does not exist: {path}")
    raw = path.read_bytes()
    if raw[:6] != magic:
        raise DataError(f"{path}: bad magic, expected {magic.decode()}")
    width, height = np.frombuffer(raw[6:14], dtype="<u4")
    body = raw[14:]
    if len(body) != int(width) * int(height) * 4:
        raise DataError(f"{path}: raster payload size mismatch")
    return int(width), int(height), body
