"""Sliding-window tiling and IoU-based instance merging.

Tiles advance by ``tile_px - overlap_px``; the last tile of each row and
column is anchored flush to the image edge so no padding pixels are ever
fabricated. Images smaller than one tile yield a single undersized tile.

Merging joins per-tile instances whose masks agree inside the geometric
overlap rectangle of their source tiles: IoU is computed on the restriction
of both masks to that strip (two halves of one long filament have near-zero
full-mask IoU, so the local restriction is what makes the criterion usable).
Pairs at or above the threshold are united transitively via union-find; the
merged mask is the exact set union and the confidence is the member maximum.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .masks import FRAME_GLOBAL, InstanceMask, rle_encode

DEFAULT_TILE_PX = 512
DEFAULT_OVERLAP_PX = 64


def _axis_anchors(size: int, tile: int, stride: int) -> list[int]:
    if size <= tile:
        return [0]
    anchors = list(range(0, size - tile + 1, stride))
    if anchors[-1] != size - tile:
        anchors.append(size - tile)
    return anchors


@dataclass(frozen=True)
class TileGrid:
    """Tile anchors covering a width x height image."""

    width: int
    height: int
    tile_px: int = DEFAULT_TILE_PX
    overlap_px: int = DEFAULT_OVERLAP_PX

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be at least 1 px")
        if self.tile_px < 1:
            raise ValueError("tile size must be at least 1 px")
        if not (0 <= self.overlap_px < self.tile_px):
            raise ValueError("need 0 <= overlap < tile size")

    @property
    def stride(self) -> int:
        return self.tile_px - self.overlap_px

    @property
    def origins(self) -> list[tuple[int, int]]:
        xs = _axis_anchors(self.width, self.tile_px, self.stride)
        ys = _axis_anchors(self.height, self.tile_px, self.stride)
        return [(x, y) for y in ys for x in xs]

    def tile_rect(self, origin: tuple[int, int]) -> tuple[int, int, int, int]:
        x0, y0 = origin
        return (x0, y0, min(self.tile_px, self.width - x0),
                min(self.tile_px, self.height - y0))


def tile(image: np.ndarray, grid: TileGrid):
    """Cut the image into (origin, tile copy) pairs per the grid."""
    if image.shape[0] != grid.height or image.shape[1] != grid.width:
        raise ValueError("image dims do not match the tile grid")
    out = []
    for origin in grid.origins:
        x0, y0, w, h = grid.tile_rect(origin)
        out.append((origin, image[y0:y0 + h, x0:x0 + w].copy()))
    return out


def reattach(results, image_width: int, image_height: int) -> list[InstanceMask]:
    """Translate per-tile masks into the global pixel frame (no merging).

    ``results`` iterates (origin, SegmentationResult) pairs; tile provenance
    is kept on each produced mask for the later overlap-strip IoU.
    """
    out = []
    for origin, res in results:
        x0, y0 = int(origin[0]), int(origin[1])
        if x0 < 0 or y0 < 0 or x0 + res.width > image_width \
                or y0 + res.height > image_height:
            raise DataError(
                f"tile at {origin} with dims {(res.width, res.height)} "
                f"exceeds image bounds {(image_width, image_height)}")
        rect = (x0, y0, res.width, res.height)
        for m in res.masks:
            local = m.to_bitmap()
            bitmap = np.zeros((image_height, image_width), dtype=bool)
            bitmap[y0:y0 + res.height, x0:x0 + res.width] = local
            out.append(InstanceMask.from_bitmap(
                m.id, bitmap, m.confidence, FRAME_GLOBAL, (0, 0), rect))
    return out


@dataclass(frozen=True)
class GlobalInstance:
    id: int
    mask: InstanceMask  # global frame
    confidence: float
    member_tiles: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0, 1]")


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, a: int) -> int:
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def _rect_intersection(a, b):
    x0 = max(a[0], b[0])
    y0 = max(a[1], b[1])
    x1 = min(a[0] + a[2], b[0] + b[2])
    y1 = min(a[1] + a[3], b[1] + b[3])
    if x1 <= x0 or y1 <= y0:
        return None
    return (x0, y0, x1 - x0, y1 - y0)


def merge_instances(masks: list[InstanceMask], iou_threshold: float,
                    image_width: int, image_height: int) -> list[GlobalInstance]:
    """Union per-tile instances that agree in their tile-overlap strips.

    A pair from distinct tiles merges when the masks share at least one pixel
    inside the strip and their strip-restricted IoU reaches the threshold
    (the shared-pixel requirement keeps threshold 0 from uniting disjoint
    masks). Output instances are renumbered 1..n by mask position (topmost
    row, then leftmost column), independent of input order.
    """
    if not (0.0 <= iou_threshold <= 1.0):
        raise ValueError("iou threshold must be in [0, 1]")
    for m in masks:
        if m.frame != FRAME_GLOBAL:
            raise ValueError(f"mask {m.id} is not in the global frame")
        if (m.width, m.height) != (image_width, image_height):
            raise ValueError(f"mask {m.id} dims do not match the image")
    if not masks:
        return []

    bitmaps = [m.to_bitmap() for m in masks]
    full_rect = (0, 0, image_width, image_height)
    rects = [m.source_rect if m.source_rect is not None else full_rect
             for m in masks]

    uf = _UnionFind(len(masks))
    for i in range(len(masks)):
        for j in range(i + 1, len(masks)):
            if rects[i] == rects[j]:
                continue  # same tile: never merged
            strip = _rect_intersection(rects[i], rects[j])
            if strip is None:
                continue
            x0, y0, w, h = strip
            sub_i = bitmaps[i][y0:y0 + h, x0:x0 + w]
            sub_j = bitmaps[j][y0:y0 + h, x0:x0 + w]
            inter = int(np.count_nonzero(sub_i & sub_j))
            if inter == 0:
                continue
            union = int(np.count_nonzero(sub_i | sub_j))
            if inter / union >= iou_threshold:
                uf.union(i, j)

    groups: dict[int, list[int]] = {}
    for k in range(len(masks)):
        groups.setdefault(uf.find(k), []).append(k)

    merged = []
    for members in groups.values():
        union_map = np.zeros((image_height, image_width), dtype=bool)
        for k in members:
            union_map |= bitmaps[k]
        rows, cols = np.nonzero(union_map)
        tiles = sorted({(rects[k][0], rects[k][1]) for k in members})
        merged.append((
            (int(rows.min()), int(cols.min())),
            union_map,
            max(masks[k].confidence for k in members),
            tuple(tiles),
        ))
    merged.sort(key=lambda item: item[0])

    out = []
    for new_id, (_, union_map, conf, tiles) in enumerate(merged, start=1):
        mask = InstanceMask(new_id, rle_encode(union_map), image_width,
                            image_height, conf, FRAME_GLOBAL)
        out.append(GlobalInstance(new_id, mask, conf, tiles))
    return out


# ---------------------------------------------------------------------------
# tile manifest
# ---------------------------------------------------------------------------


def write_manifest(path, image_id: str, grid: TileGrid, gsd_m: float,
                   tile_files: list[str]) -> None:
    origins = grid.origins
    if len(tile_files) != len(origins):
        raise ValueError("one tile file per grid origin required")
    doc = {
        "image_id": image_id,
        "width": grid.width,
        "height": grid.height,
        "gsd_m": float(gsd_m),
        "tile_px": grid.tile_px,
        "overlap_px": grid.overlap_px,
        "tiles": [
            {
                "origin": [int(o[0]), int(o[1])],
                "width": grid.tile_rect(o)[2],
                "height": grid.tile_rect(o)[3],
                "file": name,
            }
            for o, name in zip(origins, tile_files)
        ],
    }
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def read_manifest(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise DataError(f"tile manifest does not exist: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise DataError(f"{path}: invalid JSON ({err})") from err
    for key in ("image_id", "width", "height", "gsd_m", "tile_px",
                "overlap_px", "tiles"):
        if key not in doc:
            raise DataError(f"{path}: manifest missing field {key!r}")
    for entry in doc["tiles"]:
        for key in ("origin", "width", "height", "file"):
            if key not in entry:
                raise DataError(f"{path}: tile entry missing field {key!r}")
    return doc
