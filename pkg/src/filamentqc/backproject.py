"""Transfer 2D instance labels to 3D points through the render index map.

Only points the virtual camera actually saw (z-buffer winners recorded in
the index map) receive labels; occluded points stay unlabeled. A point
claimed by several instances keeps the one with the higher confidence, then
the lower instance id. Label 0 means unlabeled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import PointCloud
from .errors import DataError
from .io_ply import save_point_cloud
from .render import RenderBuffer
from .tiles import GlobalInstance


@dataclass(frozen=True)
class LabeledCloud:
    cloud: PointCloud
    labels: np.ndarray  # (n,) int64, 0 = unlabeled
    provenance: str = ""

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if lab.shape != (len(self.cloud),):
            raise ValueError("labels must be one integer per point")
        if lab.flags.writeable:
            lab = lab.copy()
            lab.flags.writeable = False
        object.__setattr__(self, "labels", lab)


def label_points(buffer_or_index_map, cloud: PointCloud,
                 instances: list[GlobalInstance],
                 provenance: str = "") -> LabeledCloud:
    """Label cloud points by the instances whose masks cover their pixels."""
    if isinstance(buffer_or_index_map, RenderBuffer):
        index_map = buffer_or_index_map.index_map
    else:
        index_map = np.asarray(buffer_or_index_map)
    height, width = index_map.shape
    labels = np.zeros(len(cloud), dtype=np.int64)
    # precedence: higher confidence first, then lower id; first claim wins
    order = sorted(instances, key=lambda g: (-g.confidence, g.id))
    for inst in order:
        if (inst.mask.width, inst.mask.height) != (width, height):
            raise DataError(
                f"instance {inst.id} mask dims {(inst.mask.width, inst.mask.height)} "
                f"do not match render dims {(width, height)}")
        bitmap = inst.mask.to_bitmap()
        hits = index_map[bitmap & (index_map >= 0)]
        if hits.size == 0:
            continue
        pts = np.unique(hits)
        fresh = pts[labels[pts] == 0]
        labels[fresh] = inst.id
    return LabeledCloud(cloud, labels, provenance)


def export_labeled(labeled: LabeledCloud, path,
                   fmt: str = "ply_binary_le") -> None:
    """Write the cloud with its original geometry and color plus a per-point
    uint ``label`` property (0 = unlabeled)."""
    save_point_cloud(labeled.cloud, path, fmt, labels=labeled.labels)
