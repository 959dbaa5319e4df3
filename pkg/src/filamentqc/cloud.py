"""Point-cloud container, bounding geometry, plane fitting, colorization.

A cloud is a fixed ordering of 3D points plus exactly one color attribute
(RGB, normalized intensity, or signed plane distance). Point indices are the
array positions and stay stable through every operation that does not drop
points; the renderer's index map and the 3D label back-projection rely on
that. All containers are immutable after construction (arrays are marked
read-only), so they can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

RGB = "rgb"
INTENSITY = "intensity"
SIGNED_DISTANCE = "signed_distance"

_KINDS = (RGB, INTENSITY, SIGNED_DISTANCE)


def _freeze(arr: np.ndarray) -> np.ndarray:
    if arr.flags.writeable:
        arr = arr.copy()
        arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ColorAttr:
    """One color attribute: kind plus per-point values.

    ``rgb`` stores (n, 3) uint8; ``intensity`` stores (n,) float64 in [0, 1];
    ``signed_distance`` stores (n,) float64 metres (may be negative).
    """

    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown color kind {self.kind!r}")
        if self.kind == RGB:
            vals = np.asarray(self.values, dtype=np.uint8)
            if vals.ndim != 2 or vals.shape[1] != 3:
                raise ValueError("rgb values must have shape (n, 3)")
        else:
            vals = np.asarray(self.values, dtype=np.float64)
            if vals.ndim != 1:
                raise ValueError(f"{self.kind} values must have shape (n,)")
            if not np.all(np.isfinite(vals)):
                raise ValueError(f"{self.kind} values must be finite")
            if self.kind == INTENSITY and vals.size and (
                vals.min() < 0.0 or vals.max() > 1.0
            ):
                raise ValueError("intensity values must lie in [0, 1]")
        object.__setattr__(self, "values", _freeze(vals))

    def __len__(self) -> int:
        return self.values.shape[0]

    def take(self, idx: np.ndarray) -> "ColorAttr":
        return ColorAttr(self.kind, self.values[idx])


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray  # (n, 3) float64, metres
    colors: ColorAttr

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("points must have shape (n, 3)")
        if not np.all(np.isfinite(pts)):
            raise ValueError("point coordinates must be finite")
        if len(self.colors) != pts.shape[0]:
            raise ValueError(
                f"color count {len(self.colors)} != point count {pts.shape[0]}"
            )
        object.__setattr__(self, "points", _freeze(pts))

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class AABB:
    min: np.ndarray  # (3,) metres
    max: np.ndarray  # (3,) metres

    def __post_init__(self):
        lo = _freeze(np.asarray(self.min, dtype=np.float64).reshape(3))
        hi = _freeze(np.asarray(self.max, dtype=np.float64).reshape(3))
        if np.any(lo > hi):
            raise ValueError("AABB min must be <= max componentwise")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def size(self) -> np.ndarray:
        return self.max - self.min

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.min + self.max)


@dataclass(frozen=True)
class Plane:
    """Plane ``dot(normal, p) == offset`` with a unit normal."""

    normal: np.ndarray  # (3,) unit vector
    offset: float  # metres

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(n) - 1.0) > 1e-9:
            raise ValueError("plane normal must be a unit vector")
        object.__setattr__(self, "normal", _freeze(n))
        object.__setattr__(self, "offset", float(self.offset))

    def signed_distance(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        n = self.normal
        # fixed elementwise order: matches scalar per-point evaluation exactly
        return (pts[..., 0] * n[0] + pts[..., 1] * n[1]
                + pts[..., 2] * n[2]) - self.offset


def compute_aabb(cloud: PointCloud) -> AABB:
    if len(cloud) == 0:
        raise ValueError("cannot compute AABB of an empty cloud")
    return AABB(cloud.points.min(axis=0), cloud.points.max(axis=0))


def compute_centroid(cloud: PointCloud) -> np.ndarray:
    if len(cloud) == 0:
        raise ValueError("cannot compute centroid of an empty cloud")
    return cloud.points.mean(axis=0)


def _canonical_sign(normal: np.ndarray) -> np.ndarray:
    # deterministic orientation: make the largest-magnitude component positive
    k = int(np.argmax(np.abs(normal)))
    return normal if normal[k] >= 0 else -normal


def _tls_plane(points: np.ndarray) -> Plane:
    centroid = points.mean(axis=0)
    centered = points - centroid
    cov = centered.T @ centered
    eigvals, eigvecs = np.linalg.eigh(cov)
    # rank check: the two larger eigenvalues must dominate for a unique normal
    scale = max(eigvals[2], 1.0e-30)
    if eigvals[1] / scale < 1e-12:
        raise ValueError("points are collinear; plane is not defined")
    normal = _canonical_sign(eigvecs[:, 0])
    normal = normal / np.linalg.norm(normal)
    return Plane(normal, float(normal @ centroid))


def fit_plane(
    cloud: PointCloud,
    method: str = "least_squares",
    ransac_iters: int = 500,
    ransac_tol_m: float = 0.002,
    seed: int = 0,
) -> Plane:
    """Fit a plane to the cloud.

    ``least_squares`` is total least squares: the normal is the smallest
    principal component of the centered covariance. ``ransac`` maximizes the
    inlier count over random 3-point hypotheses and refines with total least
    squares on the winning inlier set.
    """
    pts = cloud.points
    if len(pts) < 3:
        raise ValueError("plane fitting needs at least 3 points")
    if method == "least_squares":
        return _tls_plane(pts)
    if method != "ransac":
        raise ValueError(f"unknown plane fit method {method!r}")
    if ransac_iters < 1 or ransac_tol_m <= 0:
        raise ValueError("ransac needs iters >= 1 and tol > 0")

    rng = np.random.default_rng(seed)
    n = len(pts)
    best_count = -1
    best_inliers = None
    for _ in range(ransac_iters):
        picks = rng.choice(n, size=3, replace=False)
        a, b, c = pts[picks]
        normal = np.cross(b - a, c - a)
        norm = np.linalg.norm(normal)
        if norm < 1e-15:
            continue
        normal = normal / norm
        dist = np.abs((pts - a) @ normal)
        inliers = dist <= ransac_tol_m
        count = int(inliers.sum())
        if count > best_count:
            best_count = count
            best_inliers = inliers
    if best_inliers is None or best_count < 3:
        raise ValueError("ransac found no valid plane hypothesis")
    return _tls_plane(pts[best_inliers])


def signed_distance_colorize(cloud: PointCloud, plane: Plane) -> PointCloud:
    """Recolor the cloud with per-point signed distance to the plane.

    Geometry, ordering, and point count are preserved exactly.
    """
    dist = plane.signed_distance(cloud.points)
    return PointCloud(cloud.points, ColorAttr(SIGNED_DISTANCE, dist))


def voxel_subsample(cloud: PointCloud, voxel_m: float):
    """Collapse each occupied voxel to the centroid of its members.

    Returns ``(subsampled_cloud, source_groups)`` where ``source_groups[k]``
    holds the source point indices merged into output point ``k``. Attribute
    values are averaged per voxel. Output order follows the voxel key order
    and is deterministic.
    """
    if voxel_m <= 0:
        raise ValueError("voxel size must be positive")
    if len(cloud) == 0:
        return cloud, []
    pts = cloud.points
    keys = np.floor((pts - pts.min(axis=0)) / voxel_m).astype(np.int64)
    # ravel the 3 integer coordinates into one sortable key
    spans = keys.max(axis=0) + 1
    flat = (keys[:, 0] * spans[1] + keys[:, 1]) * spans[2] + keys[:, 2]
    uniq, inverse = np.unique(flat, return_inverse=True)
    counts = np.bincount(inverse)
    reps = np.empty((uniq.size, 3), dtype=np.float64)
    for axis in range(3):
        reps[:, axis] = np.bincount(inverse, weights=pts[:, axis]) / counts

    vals = cloud.colors.values
    if cloud.colors.kind == RGB:
        chans = [
            np.bincount(inverse, weights=vals[:, c].astype(np.float64)) / counts
            for c in range(3)
        ]
        merged = ColorAttr(RGB, np.rint(np.stack(chans, axis=1)).astype(np.uint8))
    else:
        avg = np.bincount(inverse, weights=vals) / counts
        if cloud.colors.kind == INTENSITY:
            avg = np.clip(avg, 0.0, 1.0)
        merged = ColorAttr(cloud.colors.kind, avg)

    order = np.argsort(inverse, kind="stable")
    bounds = np.cumsum(counts)[:-1]
    groups = np.split(order, bounds)
    return PointCloud(reps, merged), groups
