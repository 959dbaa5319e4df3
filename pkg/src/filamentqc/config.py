"""Pipeline configuration: flat INI sections with key=value lines.

Every command validates the whole config before touching any output. Unknown
sections or keys are rejected so typos fail loudly. ``--set section.key=value``
overrides individual entries after the file is read.

Sections and keys (defaults in parentheses)::

    [input]    path, format (ply_binary_le), colorize (keep),
               plane_method (least_squares), ransac_iters (500),
               ransac_tol_m (0.002), ransac_seed (0), voxel_m (0 = off)
    [camera]   focal_mm (4.0), pixel_size_mm (0.004), target_gsd_m (0.001),
               mode (pp), side (+y), sensor_pos (x,y,z; ksp only),
               ksp_axis (direct), near_m (0.05), far_m (0 = 4x distance),
               width_px (0 = auto), height_px (0 = auto), cx (-1 = center),
               cy (-1 = center)
    [render]   splat_radius_px (1), colormap_range_m (0.005), hole_fill (none)
    [tiling]   tile_px (512), overlap_px (64), iou_threshold (0.5)
    [segmentation] backend (baseline), external_mask_dir (), groove_k (1.0),
               min_area_px (100), min_conf (0.0)
    [profile]  mode (max), plan_file (), plots (true)
    [output]   dir
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .camera import PP_SIDES
from .errors import ConfigError
from .io_ply import FORMATS
from .render import HOLE_FILL_MODES

_SCHEMA: dict[str, dict[str, str]] = {
    "input": {
        "path": "str", "format": "str", "colorize": "str",
        "plane_method": "str", "ransac_iters": "int",
        "ransac_tol_m": "float", "ransac_seed": "int", "voxel_m": "float",
    },
    "camera": {
        "focal_mm": "float", "pixel_size_mm": "float", "target_gsd_m": "float",
        "mode": "str", "side": "str", "sensor_pos": "vec3",
        "ksp_axis": "str", "near_m": "float", "far_m": "float",
        "width_px": "int", "height_px": "int", "cx": "float", "cy": "float",
    },
    "render": {
        "splat_radius_px": "int", "colormap_range_m": "float",
        "hole_fill": "str",
    },
    "tiling": {
        "tile_px": "int", "overlap_px": "int", "iou_threshold": "float",
    },
    "segmentation": {
        "backend": "str", "external_mask_dir": "str", "groove_k": "float",
        "min_area_px": "int", "min_conf": "float",
    },
    "profile": {"mode": "str", "plan_file": "str", "plots": "bool"},
    "output": {"dir": "str"},
}


@dataclass(frozen=True)
class InputConfig:
    path: str
    format: str = "ply_binary_le"
    colorize: str = "keep"
    plane_method: str = "least_squares"
    ransac_iters: int = 500
    ransac_tol_m: float = 0.002
    ransac_seed: int = 0
    voxel_m: float = 0.0


@dataclass(frozen=True)
class CameraConfig:
    focal_mm: float = 4.0
    pixel_size_mm: float = 0.004
    target_gsd_m: float = 0.001
    mode: str = "pp"
    side: str = "+y"
    sensor_pos: tuple[float, float, float] | None = None
    ksp_axis: str = "direct"
    near_m: float = 0.05
    far_m: float = 0.0  # 0 = 4x working distance
    width_px: int = 0  # 0 = auto from bounding box
    height_px: int = 0
    cx: float = -1.0  # negative = image center
    cy: float = -1.0


@dataclass(frozen=True)
class RenderConfig:
    splat_radius_px: int = 1
    colormap_range_m: float = 0.005
    hole_fill: str = "none"


@dataclass(frozen=True)
class TilingConfig:
    tile_px: int = 512
    overlap_px: int = 64
    iou_threshold: float = 0.5


@dataclass(frozen=True)
class SegmentationConfig:
    backend: str = "baseline"
    external_mask_dir: str = ""
    groove_k: float = 1.0
    min_area_px: int = 100
    min_conf: float = 0.0


@dataclass(frozen=True)
class ProfileConfig:
    mode: str = "max"
    plan_file: str = ""
    plots: bool = True


@dataclass(frozen=True)
class PipelineConfig:
    input: InputConfig
    camera: CameraConfig = field(default_factory=CameraConfig)
    render: RenderConfig = field(default_factory=RenderConfig)
    tiling: TilingConfig = field(default_factory=TilingConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    profile: ProfileConfig = field(default_factory=ProfileConfig)
    output_dir: str = "out"


def _parse_value(section: str, key: str, raw: str):
    kind = _SCHEMA[section][key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if kind == "vec3":
            parts = [float(p) for p in raw.replace(",", " ").split()]
            if len(parts) != 3:
                raise ValueError("expected three numbers")
            return tuple(parts)
        return raw.strip()
    except ValueError as err:
        raise ConfigError(f"[{section}] {key}: {err}") from err


def _validate(cfg: PipelineConfig) -> PipelineConfig:
    inp, cam = cfg.input, cfg.camera
    if not inp.path:
        raise ConfigError("[input] path is required")
    if inp.format not in FORMATS:
        raise ConfigError(f"[input] format must be one of {FORMATS}")
    if inp.colorize not in ("keep", "signed_distance"):
        raise ConfigError("[input] colorize must be keep or signed_distance")
    if inp.plane_method not in ("least_squares", "ransac"):
        raise ConfigError("[input] plane_method must be least_squares or ransac")
    if inp.ransac_iters < 1:
        raise ConfigError("[input] ransac_iters must be >= 1")
    if inp.ransac_tol_m <= 0:
        raise ConfigError("[input] ransac_tol_m must be positive")
    if inp.voxel_m < 0:
        raise ConfigError("[input] voxel_m must be >= 0")

    if cam.focal_mm <= 0 or cam.pixel_size_mm <= 0 or cam.target_gsd_m <= 0:
        raise ConfigError("[camera] focal_mm, pixel_size_mm, target_gsd_m "
                          "must be positive")
    if cam.mode not in ("pp", "ksp"):
        raise ConfigError("[camera] mode must be pp or ksp")
    if cam.mode == "pp" and cam.side not in PP_SIDES:
        raise ConfigError(f"[camera] side must be one of {PP_SIDES}")
    if cam.mode == "ksp" and cam.sensor_pos is None:
        raise ConfigError("[camera] sensor_pos is required in ksp mode")
    if cam.ksp_axis not in ("direct", "horizontal"):
        raise ConfigError("[camera] ksp_axis must be direct or horizontal")
    if cam.near_m <= 0:
        raise ConfigError("[camera] near_m must be positive")
    if cam.far_m < 0:
        raise ConfigError("[camera] far_m must be >= 0 (0 = auto)")
    if (cam.width_px == 0) != (cam.height_px == 0):
        raise ConfigError("[camera] width_px and height_px must be set together")

    ren = cfg.render
    if not (0 <= ren.splat_radius_px <= 8):
        raise ConfigError("[render] splat_radius_px must be in [0, 8]")
    if ren.colormap_range_m <= 0:
        raise ConfigError("[render] colormap_range_m must be positive")
    if ren.hole_fill not in HOLE_FILL_MODES:
        raise ConfigError(f"[render] hole_fill must be one of {HOLE_FILL_MODES}")

    til = cfg.tiling
    if til.tile_px < 1:
        raise ConfigError("[tiling] tile_px must be >= 1")
    if not (0 <= til.overlap_px < til.tile_px):
        raise ConfigError("[tiling] need 0 <= overlap_px < tile_px")
    if not (0.0 <= til.iou_threshold <= 1.0):
        raise ConfigError("[tiling] iou_threshold must be in [0, 1]")

    seg = cfg.segmentation
    if seg.backend not in ("baseline", "external"):
        raise ConfigError("[segmentation] backend must be baseline or external")
    if seg.backend == "external" and not seg.external_mask_dir:
        raise ConfigError("[segmentation] external backend needs "
                          "external_mask_dir")
    if seg.min_area_px < 0:
        raise ConfigError("[segmentation] min_area_px must be >= 0")
    if not (0.0 <= seg.min_conf <= 1.0):
        raise ConfigError("[segmentation] min_conf must be in [0, 1]")

    if cfg.profile.mode not in ("max", "mean"):
        raise ConfigError("[profile] mode must be max or mean")
    if not cfg.output_dir:
        raise ConfigError("[output] dir is required")
    return cfg


def load_config(path, overrides: list[str] | None = None) -> PipelineConfig:
    """Read, override, and validate a pipeline config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file does not exist: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path)
    except configparser.Error as err:
        raise ConfigError(f"{path}: {err}") from err

    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            values.setdefault(section, {})[key] = _parse_value(section, key, raw)

    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(
                f"override must look like section.key=value, got {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        if section not in _SCHEMA or key not in _SCHEMA[section]:
            raise ConfigError(f"unknown override target {target!r}")
        values.setdefault(section, {})[key] = _parse_value(section, key, raw)

    if "path" not in values.get("input", {}):
        raise ConfigError("[input] path is required")
    out_dir = values.get("output", {}).get("dir", "out")
    cfg = PipelineConfig(
        input=InputConfig(**values.get("input", {})),
        camera=CameraConfig(**values.get("camera", {})),
        render=RenderConfig(**values.get("render", {})),
        tiling=TilingConfig(**values.get("tiling", {})),
        segmentation=SegmentationConfig(**values.get("segmentation", {})),
        profile=ProfileConfig(**values.get("profile", {})),
        output_dir=str(out_dir),
    )
    return _validate(cfg)
