"""Classical filament segmenter for rendered tiles.

Filaments appear as bright horizontal bands separated by darker groove rows
(rendered background is exact black and counts as invalid). The detector
scores each row by its summed intensity normalized by the widest occupied
row, then marks groove rows: rows with no valid pixels always separate, and
occupied rows separate when they are local minima of the score profile lying
below mean - k*std of the occupied-row scores. Requiring a minimum keeps the
dim outermost rows of a band (which slope toward a groove but are not its
bottom) attached to their band. Each band of consecutive non-groove rows
yields one instance per 8-connected component of its valid pixels, with the
band-to-groove contrast as a monotone stand-in for a model confidence.

This backend exists so the whole pipeline runs standalone; an external model
plugs in through the mask interchange files instead.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

from .masks import FRAME_TILE, InstanceMask, SegmentationResult

_EIGHT_CONNECTED = np.ones((3, 3), dtype=int)


def segment_baseline(image: np.ndarray, image_id: str = "tile",
                     groove_k: float = 1.0, min_area_px: int = 100,
                     origin: tuple[int, int] = (0, 0),
                     frame: str = FRAME_TILE) -> SegmentationResult:
    img = np.asarray(image)
    if img.ndim == 2:
        gray = img.astype(np.float64) / 255.0
        valid = img > 0
    elif img.ndim == 3 and img.shape[2] == 3:
        gray = img.mean(axis=2) / 255.0
        valid = img.any(axis=2)
    else:
        raise ValueError("expected a grayscale or RGB image")
    height, width = gray.shape

    counts = valid.sum(axis=1)
    widest = int(counts.max()) if counts.size else 0
    if widest == 0:
        return SegmentationResult(image_id, width, height, (), "baseline",
                                  frame, origin)

    score = (gray * valid).sum(axis=1) / widest
    occupied = counts > 0
    mean = score[occupied].mean()
    std = score[occupied].std()
    threshold = mean - groove_k * std
    padded = np.concatenate([[np.inf], score, [np.inf]])
    local_min = (score <= padded[:-2]) & (score <= padded[2:])
    groove = (~occupied) | (local_min & (score < threshold))
    if not groove.any():
        # a single seamless band offers no groove evidence: no instances
        return SegmentationResult(image_id, width, height, (), "baseline",
                                  frame, origin)

    groove_level = float(score[groove].mean())
    peak = float(score.max())
    contrast_span = max(peak - groove_level, 1e-12)

    masks = []
    next_id = 1
    row = 0
    while row < height:
        if groove[row]:
            row += 1
            continue
        top = row
        while row < height and not groove[row]:
            row += 1
        band_rows = slice(top, row)
        band_fg = valid[band_rows]
        if not band_fg.any():
            continue
        conf = float(np.clip(
            (score[band_rows].mean() - groove_level) / contrast_span, 0.0, 1.0))
        labels, n_comp = ndimage.label(band_fg, structure=_EIGHT_CONNECTED)
        for comp in range(1, n_comp + 1):
            comp_mask = labels == comp
            if int(comp_mask.sum()) < min_area_px:
                continue
            bitmap = np.zeros((height, width), dtype=bool)
            bitmap[band_rows] = comp_mask
            masks.append(InstanceMask.from_bitmap(
                next_id, bitmap, conf, frame, origin))
            next_id += 1
    return SegmentationResult(image_id, width, height, tuple(masks),
                              "baseline", frame, origin)
