"""Virtual pinhole camera: sampling-distance planning, placement, projection.

Conventions, fixed once and relied on everywhere downstream:

* World up-axis is +z (print layers stack along +z).
* Camera frame: +z looks forward into the scene, +x right, +y down. A point
  projects to continuous pixel coordinates ``u = fx*x/z + cx``,
  ``v = fy*y/z + cy``; the pixel with integer coordinates (i, j) owns the
  half-open square [i, i+1) x [j, j+1).
* Camera roll is fixed so image "up" (decreasing v) aligns with world +z
  projected into the image; for straight-down views the reference flips to
  world +y. Filament layers therefore appear as horizontal image bands.
* Rotations compose as R = Rx(theta) @ Ry(phi) @ Rz(psi): a vector is rotated
  about z first, then y, then x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cloud import AABB, PointCloud

PP_SIDES = ("+x", "-x", "+y", "-y", "top")


@dataclass(frozen=True)
class Intrinsics:
    """Single-focal, square-pixel pinhole intrinsics."""

    focal_mm: float
    pixel_size_mm: float
    width_px: int
    height_px: int
    cx: float
    cy: float

    def __post_init__(self):
        if self.focal_mm <= 0 or self.pixel_size_mm <= 0:
            raise ValueError("focal length and pixel size must be positive")
        if self.width_px < 1 or self.height_px < 1:
            raise ValueError("image dimensions must be at least 1 px")
        if not (0 <= self.cx < self.width_px and 0 <= self.cy < self.height_px):
            raise ValueError("principal point must lie inside the image")

    @property
    def fx(self) -> float:
        return self.focal_mm / self.pixel_size_mm

    @property
    def fy(self) -> float:
        return self.focal_mm / self.pixel_size_mm


@dataclass(frozen=True)
class EulerAngles:
    psi: float  # about z, applied first
    phi: float  # about y
    theta: float  # about x, applied last

    def __post_init__(self):
        if not all(np.isfinite([self.psi, self.phi, self.theta])):
            raise ValueError("Euler angles must be finite")


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform: p_cam = R @ p_world + t."""

    rotation: np.ndarray  # (3, 3)
    translation: np.ndarray  # (3,)

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64).reshape(3, 3)
        t = np.asarray(self.translation, dtype=np.float64).reshape(3)
        if np.max(np.abs(r.T @ r - np.eye(3))) > 1e-9:
            raise ValueError("rotation must be orthonormal")
        if abs(np.linalg.det(r) - 1.0) > 1e-9:
            raise ValueError("rotation must be proper (det +1)")
        r = r.copy()
        t = t.copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @property
    def camera_center(self) -> np.ndarray:
        return -self.rotation.T @ self.translation


def gsd(distance_m: float, pixel_size_mm: float, focal_mm: float) -> float:
    """Ground sampling distance in metres per pixel at the given range."""
    if distance_m <= 0 or pixel_size_mm <= 0 or focal_mm <= 0:
        raise ValueError("gsd inputs must be positive")
    return distance_m * pixel_size_mm / focal_mm


def working_distance(target_gsd_m_per_px: float, pixel_size_mm: float,
                     focal_mm: float) -> float:
    """Camera range that realizes the target ground sampling distance."""
    if target_gsd_m_per_px <= 0 or pixel_size_mm <= 0 or focal_mm <= 0:
        raise ValueError("working_distance inputs must be positive")
    return target_gsd_m_per_px * focal_mm / pixel_size_mm

# Sampling cap: half the inter-filament gap resolves adjacent layers, and
# 1 mm/px is the coarsest pitch allowed regardless of gap.
GSD_CAP_M = 0.001


def shannon_gsd(inter_filament_gap_m: float) -> float:
    if inter_filament_gap_m <= 0:
        raise ValueError("inter-filament gap must be positive")
    return min(inter_filament_gap_m / 2.0, GSD_CAP_M)


def euler_to_rotation(angles: EulerAngles) -> np.ndarray:
    """R = Rx(theta) @ Ry(phi) @ Rz(psi); rotation order z, then y, then x."""
    cps, sps = np.cos(angles.psi), np.sin(angles.psi)
    cph, sph = np.cos(angles.phi), np.sin(angles.phi)
    cth, sth = np.cos(angles.theta), np.sin(angles.theta)
    rz = np.array([[cps, -sps, 0.0], [sps, cps, 0.0], [0.0, 0.0, 1.0]])
    ry = np.array([[cph, 0.0, sph], [0.0, 1.0, 0.0], [-sph, 0.0, cph]])
    rx = np.array([[1.0, 0.0, 0.0], [0.0, cth, -sth], [0.0, sth, cth]])
    return rx @ ry @ rz


def look_at(camera_center, view_dir) -> Pose:
    """Pose looking along ``view_dir`` with the fixed roll convention."""
    center = np.asarray(camera_center, dtype=np.float64).reshape(3)
    z_cam = np.asarray(view_dir, dtype=np.float64).reshape(3)
    norm = np.linalg.norm(z_cam)
    if norm < 1e-15:
        raise ValueError("view direction must be nonzero")
    z_cam = z_cam / norm
    up = np.array([0.0, 0.0, 1.0])
    if abs(z_cam @ up) > 1.0 - 1e-9:
        up = np.array([0.0, 1.0, 0.0])  # straight-up/down view: map +y
    lateral = up - (up @ z_cam) * z_cam
    y_cam = -lateral / np.linalg.norm(lateral)
    x_cam = np.cross(y_cam, z_cam)
    rot = np.stack([x_cam, y_cam, z_cam], axis=0)
    return Pose(rot, -rot @ center)


_SIDE_NORMALS = {
    "+x": np.array([1.0, 0.0, 0.0]),
    "-x": np.array([-1.0, 0.0, 0.0]),
    "+y": np.array([0.0, 1.0, 0.0]),
    "-y": np.array([0.0, -1.0, 0.0]),
    "top": np.array([0.0, 0.0, 1.0]),
}


def side_center(aabb: AABB, side: str) -> np.ndarray:
    if side not in PP_SIDES:
        raise ValueError(f"unknown bounding-box side {side!r}")
    center = aabb.center.copy()
    axis = {"+x": 0, "-x": 0, "+y": 1, "-y": 1, "top": 2}[side]
    center[axis] = aabb.max[axis] if _SIDE_NORMALS[side][axis] > 0 else aabb.min[axis]
    return center


def place_pp(aabb: AABB, side: str, working_distance_m: float) -> Pose:
    """Predefined-position placement: camera axis is the outward normal of
    the chosen bounding-box side, through the side center, at the given
    stand-off from the side plane."""
    if side not in PP_SIDES:
        raise ValueError(f"unknown bounding-box side {side!r}")
    if working_distance_m <= 0:
        raise ValueError("working distance must be positive")
    axis = {"+x": 0, "-x": 0, "+y": 1, "-y": 1, "top": 2}[side]
    size = aabb.size
    face_dims = [size[k] for k in range(3) if k != axis]
    if min(face_dims) <= 0:
        raise ValueError(f"bounding-box side {side} is degenerate (zero area)")
    outward = _SIDE_NORMALS[side]
    center = side_center(aabb, side)
    return look_at(center + outward * working_distance_m, -outward)


def place_ksp(sensor_pos, centroid, mode: str,
              working_distance_m: float) -> Pose:
    """Known-sensor-position placement.

    ``direct`` looks along sensor->centroid; ``horizontal`` first projects
    that axis onto the horizontal plane through the centroid. The camera sits
    on the axis at the working distance from the centroid.
    """
    if working_distance_m <= 0:
        raise ValueError("working distance must be positive")
    sensor = np.asarray(sensor_pos, dtype=np.float64).reshape(3)
    target = np.asarray(centroid, dtype=np.float64).reshape(3)
    axis = target - sensor
    if mode == "horizontal":
        axis = axis.copy()
        axis[2] = 0.0
    elif mode != "direct":
        raise ValueError(f"unknown ksp mode {mode!r}")
    norm = np.linalg.norm(axis)
    if norm < 1e-12:
        raise ValueError(
            "sensor position and centroid coincide"
            + (" after horizontal projection" if mode == "horizontal" else ""))
    axis = axis / norm
    return look_at(target - axis * working_distance_m, axis)


@dataclass(frozen=True)
class Frustum:
    """Six inward-facing world-frame planes (near, far, left, right, top,
    bottom): inside means signed distance >= 0 to all of them."""

    planes: np.ndarray  # (6, 4) rows [nx, ny, nz, d]; n.p + d >= 0 inside
    near_m: float
    far_m: float

    def __post_init__(self):
        p = np.asarray(self.planes, dtype=np.float64).reshape(6, 4).copy()
        p.flags.writeable = False
        object.__setattr__(self, "planes", p)
        if not (0 < self.near_m < self.far_m):
            raise ValueError("need 0 < near < far")

    def contains(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        signed = pts @ self.planes[:, :3].T + self.planes[:, 3]
        return np.all(signed >= 0.0, axis=1)


def build_frustum(pose: Pose, intr: Intrinsics, near_m: float,
                  far_m: float) -> Frustum:
    """View volume of the full image extent between the near and far planes."""
    if not (0 < near_m < far_m):
        raise ValueError("need 0 < near < far")
    fx, fy = intr.fx, intr.fy
    w, h = intr.width_px, intr.height_px
    # camera-frame inward normals (last entry is the plane offset)
    cam_planes = np.array([
        [0.0, 0.0, 1.0, -near_m],          # z >= near
        [0.0, 0.0, -1.0, far_m],           # z <= far
        [fx, 0.0, intr.cx, 0.0],           # u >= 0
        [-fx, 0.0, w - intr.cx, 0.0],      # u <= w
        [0.0, fy, intr.cy, 0.0],           # v >= 0
        [0.0, -fy, h - intr.cy, 0.0],      # v <= h
    ])
    rot, t = pose.rotation, pose.translation
    out = np.empty((6, 4))
    for k, row in enumerate(cam_planes):
        n_cam, d_cam = row[:3], row[3]
        scale = np.linalg.norm(n_cam)
        out[k, :3] = (rot.T @ n_cam) / scale
        out[k, 3] = (d_cam + n_cam @ t) / scale
    return Frustum(out, near_m, far_m)


def clip(cloud: PointCloud, frustum: Frustum) -> np.ndarray:
    """Indices of cloud points inside the frustum; the cloud is untouched."""
    if len(cloud) == 0:
        return np.empty(0, dtype=np.int64)
    return np.flatnonzero(frustum.contains(cloud.points)).astype(np.int64)


def project(pose: Pose, intr: Intrinsics, point):
    """Project one world point to (u, v, depth); None when behind the camera."""
    p_cam = pose.rotation @ np.asarray(point, dtype=np.float64).reshape(3) \
        + pose.translation
    depth = p_cam[2]
    if depth <= 0.0:
        return None
    u = intr.fx * p_cam[0] / depth + intr.cx
    v = intr.fy * p_cam[1] / depth + intr.cy
    return (float(u), float(v), float(depth))


def project_points(pose: Pose, intr: Intrinsics, points: np.ndarray):
    """Vectorized projection: returns (u, v, depth) arrays; entries with
    depth <= 0 are behind the camera and carry NaN pixel coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    p_cam = pts @ pose.rotation.T + pose.translation
    depth = p_cam[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(depth > 0, intr.fx * p_cam[:, 0] / depth + intr.cx, np.nan)
        v = np.where(depth > 0, intr.fy * p_cam[:, 1] / depth + intr.cy, np.nan)
    return u, v, depth


def frame_intrinsics(pose: Pose, focal_mm: float, pixel_size_mm: float,
                     aabb: AABB, tile_px: int = 512) -> Intrinsics:
    """Derive image dimensions that cover the projected box, rounded up to
    whole tiles, with the principal point at the image center."""
    if tile_px < 1:
        raise ValueError("tile size must be at least 1 px")
    lo, hi = aabb.min, aabb.max
    corners = np.array([[lo[0], lo[1], lo[2]], [lo[0], lo[1], hi[2]],
                        [lo[0], hi[1], lo[2]], [lo[0], hi[1], hi[2]],
                        [hi[0], lo[1], lo[2]], [hi[0], lo[1], hi[2]],
                        [hi[0], hi[1], lo[2]], [hi[0], hi[1], hi[2]]])
    fx = focal_mm / pixel_size_mm
    p_cam = corners @ pose.rotation.T + pose.translation
    depth = p_cam[:, 2]
    if np.any(depth <= 0):
        raise ValueError("bounding box extends behind the camera")
    u = fx * p_cam[:, 0] / depth
    v = fx * p_cam[:, 1] / depth
    half_w = float(np.max(np.abs(u)))
    half_h = float(np.max(np.abs(v)))
    width = max(tile_px, int(np.ceil(2.0 * half_w / tile_px)) * tile_px)
    height = max(tile_px, int(np.ceil(2.0 * half_h / tile_px)) * tile_px)
    return Intrinsics(focal_mm, pixel_size_mm, width, height,
                      width / 2.0, height / 2.0)
