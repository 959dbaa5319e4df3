"""Filament thickness from the exact Euclidean distance transform.

Each foreground pixel gets its exact Euclidean distance to the nearest
background pixel (the layer edge). Masks are always padded with a one-pixel
background border first, so a mask touching the image edge still measures
against a boundary instead of running unbounded. The filament thickness at a
column is twice the column's ridge value: the maximum of the distance values
(methods default) or their mean over foreground pixels (both aggregations are
offered; they answer slightly different questions and are reported under an
explicit mode tag).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

PROFILE_MODES = ("max", "mean")


@dataclass(frozen=True)
class DistanceMap:
    values: np.ndarray  # (h, w) float64, 0 exactly on background
    mask_id: int = 0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.flags.writeable:
            vals = vals.copy()
            vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


def distance_transform(mask: np.ndarray, mask_id: int = 0) -> DistanceMap:
    """Exact Euclidean distance transform of a binary mask, in pixels."""
    fg = np.asarray(mask, dtype=bool)
    if fg.ndim != 2:
        raise ValueError("mask must be 2-D")
    padded = np.zeros((fg.shape[0] + 2, fg.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = fg
    sq = kernels.edt_sq(padded)[1:-1, 1:-1]
    values = np.sqrt(sq.astype(np.float64))
    values[~fg] = 0.0
    return DistanceMap(values, mask_id)


@dataclass(frozen=True)
class ThicknessStats:
    mean_mm: float
    min_mm: float
    max_mm: float
    std_mm: float


@dataclass(frozen=True)
class ThicknessProfile:
    instance_id: int
    mode: str
    ridge_px: np.ndarray  # per column; 0 where invalid
    valid: np.ndarray  # per column: has foreground
    gsd_m: float
    col_offset: int = 0  # global column of local column 0
    row_center: float = 0.0  # mean foreground row, for vertical ordering
    row_range: tuple[float, float] = (0.0, 0.0)

    @property
    def thickness_px(self) -> np.ndarray:
        return 2.0 * self.ridge_px

    @property
    def thickness_mm(self) -> np.ndarray:
        return self.thickness_px * self.gsd_m * 1000.0

    @property
    def stats(self) -> ThicknessStats | None:
        if not self.valid.any():
            return None
        t = self.thickness_mm[self.valid]
        return ThicknessStats(float(t.mean()), float(t.min()),
                              float(t.max()), float(t.std()))

    @property
    def max_thickness_mm(self) -> float:
        if not self.valid.any():
            return 0.0
        return float(self.thickness_mm[self.valid].max())


def column_profile(dmap: DistanceMap, gsd_m: float, mode: str = "max",
                   instance_id: int | None = None,
                   col_offset: int = 0) -> ThicknessProfile:
    """Per-column ridge of the distance map; thickness is twice the ridge."""
    if mode not in PROFILE_MODES:
        raise ValueError(f"unknown profile mode {mode!r}")
    if gsd_m <= 0:
        raise ValueError("gsd must be positive")
    vals = dmap.values
    fg = vals > 0
    valid = fg.any(axis=0)
    ncols = vals.shape[1]
    ridge = np.zeros(ncols, dtype=np.float64)
    if mode == "max":
        ridge[valid] = vals.max(axis=0)[valid]
    else:
        counts = fg.sum(axis=0)
        sums = vals.sum(axis=0)
        ridge[valid] = sums[valid] / counts[valid]
    if fg.any():
        rows = np.nonzero(fg)[0]
        row_center = float(rows.mean())
        row_range = (float(rows.min()), float(rows.max()))
    else:
        row_center = 0.0
        row_range = (0.0, 0.0)
    return ThicknessProfile(
        dmap.mask_id if instance_id is None else instance_id,
        mode, ridge, valid, gsd_m, col_offset, row_center, row_range)


@dataclass(frozen=True)
class PlanEntry:
    instance_id: int
    layer_index: int
    planned_mm: float
    measured_mm: float

    @property
    def deviation_mm(self) -> float:
        return self.measured_mm - self.planned_mm


@dataclass(frozen=True)
class PlanComparison:
    entries: tuple[PlanEntry, ...]
    ordering_warning: bool


def compare_to_plan(profiles: list[ThicknessProfile],
                    plan_mm: list[float]) -> PlanComparison:
    """Match instances to planned layer heights bottom-to-top.

    Instances are ordered by mean foreground row with image-up ordering
    (larger row = lower layer, so descending row_center is bottom first).
    Overlapping or out-of-order vertical ranges raise a warning flag but the
    comparison is still emitted.
    """
    if len(profiles) > len(plan_mm):
        raise ValueError(
            f"{len(profiles)} instances exceed plan length {len(plan_mm)}")
    ordered = sorted(profiles, key=lambda p: -p.row_center)
    warning = False
    for below, above in zip(ordered, ordered[1:]):
        # below sits at larger rows; its range must not reach into above's
        if above.row_range[1] > below.row_range[0]:
            warning = True
    entries = tuple(
        PlanEntry(p.instance_id, t, float(plan_mm[t]), p.max_thickness_mm)
        for t, p in enumerate(ordered))
    return PlanComparison(entries, warning)
