"""Instance masks, run-length coding, and the mask interchange files.

RLE layout: row-major scan, alternating background/foreground run lengths,
always starting with a background run (possibly 0). Runs sum to
width*height.

Interchange file (JSON, one per image or tile)::

    {
      "image_id": "...",
      "width": W, "height": H,
      "frame": "tile" | "global",
      "origin": [x0, y0],          # required iff frame == "tile"
      "masks": [
        {"id": 1, "confidence": 0.93, "rle": [12, 5, 40, ...]},
        ...
      ]
    }

Export is canonical (fixed key order, 2-space indent), so export -> import
-> export is byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError

FRAME_TILE = "tile"
FRAME_GLOBAL = "global"


def rle_encode(bitmap: np.ndarray) -> np.ndarray:
    """Row-major alternating bg/fg run lengths, leading background run."""
    flat = np.asarray(bitmap, dtype=bool).ravel()
    if flat.size == 0:
        return np.zeros(0, dtype=np.int64)
    edges = np.flatnonzero(flat[1:] != flat[:-1]) + 1
    bounds = np.concatenate(([0], edges, [flat.size]))
    runs = np.diff(bounds).astype(np.int64)
    if flat[0]:
        runs = np.concatenate(([0], runs))
    return runs


def rle_decode(rle: np.ndarray, width: int, height: int) -> np.ndarray:
    runs = np.asarray(rle, dtype=np.int64).ravel()
    if runs.size and runs.min() < 0:
        raise DataError("rle runs must be non-negative")
    if int(runs.sum()) != width * height:
        raise DataError(
            f"rle runs sum to {int(runs.sum())}, expected {width * height}")
    values = np.zeros(runs.size, dtype=bool)
    values[1::2] = True
    return np.repeat(values, runs).reshape(height, width)


@dataclass(frozen=True)
class InstanceMask:
    """One filament instance in either its tile frame or the global frame.

    ``source_rect`` (x0, y0, w, h) records the originating tile and survives
    the move to the global frame; the merger uses it to restrict IoU to the
    geometric tile-overlap strip.
    """

    id: int
    rle: np.ndarray
    width: int
    height: int
    confidence: float
    frame: str = FRAME_TILE
    origin: tuple[int, int] = (0, 0)
    source_rect: tuple[int, int, int, int] | None = None

    def __post_init__(self):
        runs = np.asarray(self.rle, dtype=np.int64).copy()
        runs.flags.writeable = False
        object.__setattr__(self, "rle", runs)
        if self.frame not in (FRAME_TILE, FRAME_GLOBAL):
            raise ValueError(f"unknown mask frame {self.frame!r}")
        if not (0.0 <= self.confidence <= 1.0):
            raise ValueError("confidence must be in [0, 1]")
        if runs.size and runs.min() < 0:
            raise ValueError("rle runs must be non-negative")
        if int(runs.sum()) != self.width * self.height:
            raise ValueError("rle runs must sum to width*height")
        if int(runs[1::2].sum()) == 0:
            raise ValueError("mask foreground must be non-empty")

    @classmethod
    def from_bitmap(cls, mask_id: int, bitmap: np.ndarray, confidence: float,
                    frame: str = FRAME_TILE, origin: tuple[int, int] = (0, 0),
                    source_rect=None) -> "InstanceMask":
        bitmap = np.asarray(bitmap, dtype=bool)
        return cls(mask_id, rle_encode(bitmap), bitmap.shape[1],
                   bitmap.shape[0], confidence, frame, tuple(origin),
                   source_rect)

    def to_bitmap(self) -> np.ndarray:
        return rle_decode(self.rle, self.width, self.height)

    @property
    def area(self) -> int:
        return int(self.rle[1::2].sum())


@dataclass(frozen=True)
class SegmentationResult:
    image_id: str
    width: int
    height: int
    masks: tuple[InstanceMask, ...] = ()
    backend: str = "baseline"
    frame: str = FRAME_TILE
    origin: tuple[int, int] = (0, 0)

    def __post_init__(self):
        object.__setattr__(self, "masks", tuple(self.masks))
        for m in self.masks:
            if (m.width, m.height) != (self.width, self.height):
                raise ValueError(
                    f"mask {m.id} dims {(m.width, m.height)} do not match "
                    f"image dims {(self.width, self.height)}")


def filter_masks(result: SegmentationResult, min_area_px: int = 0,
                 min_conf: float = 0.0) -> SegmentationResult:
    kept = tuple(m for m in result.masks
                 if m.area >= min_area_px and m.confidence >= min_conf)
    return replace(result, masks=kept)


def export_masks(result: SegmentationResult, path) -> None:
    doc = {
        "image_id": result.image_id,
        "width": result.width,
        "height": result.height,
        "frame": result.frame,
    }
    if result.frame == FRAME_TILE:
        doc["origin"] = [int(result.origin[0]), int(result.origin[1])]
    doc["backend"] = result.backend
    doc["masks"] = [
        {
            "id": int(m.id),
            "confidence": float(m.confidence),
            "rle": [int(r) for r in m.rle],
        }
        for m in result.masks
    ]
    with Path(path).open("w") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def import_masks(path) -> SegmentationResult:
    path = Path(path)
    if not path.exists():
        raise DataError(f"mask file does not exist: {path}")
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise DataError(f"{path}: invalid JSON ({err})") from err

    for key in ("image_id", "width", "height", "frame", "masks"):
        if key not in doc:
            raise DataError(f"{path}: missing field {key!r}")
    frame = doc["frame"]
    if frame not in (FRAME_TILE, FRAME_GLOBAL):
        raise DataError(f"{path}: unknown frame {frame!r}")
    origin = (0, 0)
    if frame == FRAME_TILE:
        if "origin" not in doc:
            raise DataError(f"{path}: tile-frame file lacks 'origin'")
        origin = (int(doc["origin"][0]), int(doc["origin"][1]))
    width, height = int(doc["width"]), int(doc["height"])

    masks = []
    for entry in doc["masks"]:
        mask_id = entry.get("id")
        for key in ("id", "confidence", "rle"):
            if key not in entry:
                raise DataError(
                    f"{path}: mask {mask_id!r} missing field {key!r}")
        try:
            masks.append(InstanceMask(
                int(entry["id"]), np.asarray(entry["rle"], dtype=np.int64),
                width, height, float(entry["confidence"]), frame, origin))
        except (ValueError, TypeError) as err:
            raise DataError(f"{path}: mask {mask_id!r}: {err}") from err
    return SegmentationResult(str(doc["image_id"]), width, height,
                              tuple(masks), str(doc.get("backend", "external")),
                              frame, origin)
