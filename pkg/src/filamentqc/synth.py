"""Synthetic printed-object clouds with ground-truth layer labels.

The generator sweeps a filament cross-section along a straight or helical
path, stacks ``n_layers`` copies along +z (layer t spans
[t*h, (t+1)*h]), and emits only the outward, camera-facing surface. The
groove crease between neighboring layers recedes; anything deeper than
``groove_depth_mm`` is treated as self-occluded and not emitted, which is
what a single-viewpoint capture of stacked filaments sees.

Points sit on a (path, height) grid with ``point_spacing_mm`` pitch and get
an intensity from the surface inclination (grazing surfaces reflect less).
Gaussian surface roughness displaces each point along the outward bulge
direction: printed-surface roughness modulates how far the filament bulges,
not where the layer sits vertically. Everything is driven by one seeded
generator, so a given (spec, seed) pair reproduces the cloud bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud import INTENSITY, ColorAttr, PointCloud

CROSS_SECTIONS = ("stadium", "elliptical")

_AMBIENT = 0.2  # intensity floor so grazing surfaces stay visible


@dataclass(frozen=True)
class StraightPath:
    length_m: float

    def __post_init__(self):
        if self.length_m <= 0:
            raise ValueError("path length must be positive")


@dataclass(frozen=True)
class HelicalPath:
    radius_m: float
    pitch_mm: float
    turns: float

    def __post_init__(self):
        if self.radius_m <= 0 or self.pitch_mm <= 0 or self.turns <= 0:
            raise ValueError("helix radius, pitch, and turns must be positive")


@dataclass(frozen=True)
class SynthSpec:
    n_layers: int
    filament_height_mm: float
    filament_width_mm: float
    path: StraightPath | HelicalPath
    cross_section: str = "stadium"
    surface_noise_sigma_mm: float = 0.0
    point_spacing_mm: float = 1.0
    groove_depth_mm: float = 2.0

    def __post_init__(self):
        if self.n_layers < 1:
            raise ValueError("need at least one layer")
        if min(self.filament_height_mm, self.filament_width_mm,
               self.point_spacing_mm, self.groove_depth_mm) <= 0:
            raise ValueError("all dimensions must be positive")
        if self.surface_noise_sigma_mm < 0:
            raise ValueError("noise sigma must be non-negative")
        if self.point_spacing_mm > self.filament_height_mm / 4.0:
            raise ValueError(
                "point spacing must be at most a quarter filament height")
        if self.cross_section not in CROSS_SECTIONS:
            raise ValueError(f"unknown cross section {self.cross_section!r}")
        limit = self.filament_height_mm / 2.0 if self.cross_section == "stadium" \
            else self.filament_width_mm / 2.0
        if self.groove_depth_mm > limit:
            raise ValueError("groove depth exceeds the cross-section bulge")


@dataclass(frozen=True)
class SynthResult:
    cloud: PointCloud
    labels: np.ndarray  # (n,) int64, 1-based layer index
    layer_heights_mm: tuple[float, ...]


def _face_profile(spec: SynthSpec):
    """Outward face of the cross-section as functions of height offset zeta
    (metres from the layer center): returns (zeta_max, bulge(zeta),
    slope components of the unit outward normal)."""
    h = spec.filament_height_mm / 1000.0
    w = spec.filament_width_mm / 1000.0
    d = spec.groove_depth_mm / 1000.0
    if spec.cross_section == "stadium":
        r = h / 2.0
        flat = w / 2.0 - r
        zeta_max = math.sqrt(d * (h - d))

        def bulge(zeta):
            return flat + np.sqrt(np.maximum(r * r - zeta * zeta, 0.0))

        def normal(zeta):
            ny = np.sqrt(np.maximum(r * r - zeta * zeta, 0.0)) / r
            nz = zeta / r
            return ny, nz
    else:
        a = w / 2.0
        b = h / 2.0
        zeta_max = b * math.sqrt(max(1.0 - (1.0 - d / a) ** 2, 0.0))

        def bulge(zeta):
            return a * np.sqrt(np.maximum(1.0 - (zeta / b) ** 2, 0.0))

        def normal(zeta):
            ny = bulge(zeta) / (a * a)
            nz = zeta / (b * b)
            scale = np.sqrt(ny * ny + nz * nz)
            return ny / scale, nz / scale

    return zeta_max, bulge, normal


def _height_samples(zeta_max: float, spacing: float) -> np.ndarray:
    n = max(1, int(math.floor(2.0 * zeta_max / spacing)) + 1)
    return (np.arange(n) - (n - 1) / 2.0) * spacing


def generate(spec: SynthSpec, seed: int = 0) -> SynthResult:
    rng = np.random.default_rng(seed)
    h = spec.filament_height_mm / 1000.0
    spacing = spec.point_spacing_mm / 1000.0
    sigma = spec.surface_noise_sigma_mm / 1000.0
    zeta_max, bulge, normal = _face_profile(spec)
    zetas = _height_samples(zeta_max, spacing)

    points = []
    normals = []
    outwards = []
    labels = []

    if isinstance(spec.path, StraightPath):
        s = np.arange(0.0, spec.path.length_m + spacing / 2.0, spacing)
        for layer in range(spec.n_layers):
            z_center = (layer + 0.5) * h
            for zeta in zetas:
                y = float(bulge(zeta))
                ny, nz = normal(zeta)
                n_pts = s.size
                pts = np.empty((n_pts, 3))
                pts[:, 0] = s
                pts[:, 1] = y
                pts[:, 2] = z_center + zeta
                points.append(pts)
                nrm = np.zeros((n_pts, 3))
                nrm[:, 1] = ny
                nrm[:, 2] = nz
                normals.append(nrm)
                out = np.zeros((n_pts, 3))
                out[:, 1] = 1.0
                outwards.append(out)
                labels.append(np.full(n_pts, layer + 1, dtype=np.int64))
    else:
        if abs(spec.path.turns - spec.n_layers) > 1e-9:
            raise ValueError("helical path turns must equal n_layers")
        radius = spec.path.radius_m
        pitch = spec.path.pitch_mm / 1000.0
        du = spacing / radius
        u = np.arange(0.0, 2.0 * math.pi * spec.path.turns, du)
        layer_of_u = np.minimum(np.floor(u / (2.0 * math.pi)).astype(np.int64),
                                spec.n_layers - 1)
        cos_u, sin_u = np.cos(u), np.sin(u)
        z_center = h / 2.0 + (u / (2.0 * math.pi)) * pitch
        for zeta in zetas:
            rad = radius + float(bulge(zeta))
            ny, nz = normal(zeta)
            pts = np.stack([rad * cos_u, rad * sin_u, z_center + zeta], axis=1)
            nrm = np.stack([ny * cos_u, ny * sin_u,
                            np.full(u.size, nz)], axis=1)
            points.append(pts)
            normals.append(nrm)
            outwards.append(np.stack([cos_u, sin_u, np.zeros(u.size)], axis=1))
            labels.append(layer_of_u + 1)

    pts = np.concatenate(points, axis=0)
    nrm = np.concatenate(normals, axis=0)
    labels = np.concatenate(labels, axis=0)

    if sigma > 0:
        outward = np.concatenate(outwards, axis=0)
        pts = pts + outward * rng.normal(0.0, sigma, size=len(pts))[:, None]

    intensity = np.clip(_AMBIENT + (1.0 - _AMBIENT) * nrm_outward(nrm), 0.0, 1.0)
    cloud = PointCloud(pts, ColorAttr(INTENSITY, intensity))
    heights = tuple(float(spec.filament_height_mm)
                    for _ in range(spec.n_layers))
    return SynthResult(cloud, labels, heights)


def nrm_outward(nrm: np.ndarray) -> np.ndarray:
    """Horizontal (outward-facing) share of the unit normal."""
    return np.sqrt(np.maximum(nrm[:, 0] ** 2 + nrm[:, 1] ** 2, 0.0))
