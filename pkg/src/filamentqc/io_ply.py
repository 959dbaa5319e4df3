"""PLY and XYZ point-cloud I/O.

Supported inputs: PLY 1.0 (ascii, binary_little_endian) with a single vertex
element carrying x, y, z plus at most one color attribute (red/green/blue,
intensity, signed_distance, or a generic scalar), optionally a per-point
integer label; XYZ text with ``x y z [s]`` per line and ``#`` comments.

ASCII floats are written with 17 significant digits, so even the text format
round-trips float64 exactly. Binary files round-trip bit for bit.

Normalization at load:

* ``intensity`` values already inside [0, 1] are kept as stored (so that our
  own files round-trip unchanged); out-of-range intensities and any generic
  ``scalar`` column are min-max normalized, a constant column mapping to 0.5.
* ``signed_distance`` is kept raw (metres).
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .cloud import INTENSITY, RGB, SIGNED_DISTANCE, ColorAttr, PointCloud
from .errors import DataError

PLY_ASCII = "ply_ascii"
PLY_BINARY_LE = "ply_binary_le"
XYZ_TEXT = "xyz_text"

FORMATS = (PLY_ASCII, PLY_BINARY_LE, XYZ_TEXT)

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}

_KNOWN_PROPS = {
    "x", "y", "z", "red", "green", "blue",
    "intensity", "signed_distance", "scalar", "label",
}


def _fmt_float(v: float) -> str:
    return format(float(v), ".17g")


def _normalize_scalar(values: np.ndarray) -> np.ndarray:
    lo = float(values.min())
    hi = float(values.max())
    if hi == lo:
        return np.full(values.shape, 0.5)
    return (values - lo) / (hi - lo)


class _PlyHeader:
    def __init__(self, fmt: str, count: int, props: list[tuple[str, str]],
                 data_offset: int):
        self.fmt = fmt
        self.count = count
        self.props = props  # (name, numpy dtype code)
        self.data_offset = data_offset


def _parse_ply_header(raw: bytes, path: Path) -> _PlyHeader:
    end = raw.find(b"end_header")
    if not raw.startswith(b"ply") or end < 0:
        raise DataError(f"{path}: not a PLY file (missing ply/end_header)")
    newline = raw.find(b"\n", end)
    if newline < 0:
        raise DataError(f"{path}: truncated PLY header")
    header_text = raw[:newline].decode("ascii", errors="replace")
    lines = [ln.strip() for ln in header_text.splitlines()]

    fmt = None
    count = None
    props: list[tuple[str, str]] = []
    in_vertex = False
    for lineno, line in enumerate(lines[1:], start=2):
        if not line or line.startswith("comment") or line.startswith("obj_info"):
            continue
        parts = line.split()
        if parts[0] == "format":
            if len(parts) != 3 or parts[2] != "1.0":
                raise DataError(f"{path}:{lineno}: unsupported PLY format line {line!r}")
            if parts[1] == "ascii":
                fmt = PLY_ASCII
            elif parts[1] == "binary_little_endian":
                fmt = PLY_BINARY_LE
            else:
                raise DataError(f"{path}:{lineno}: unsupported PLY encoding {parts[1]!r}")
        elif parts[0] == "element":
            if parts[1] == "vertex":
                count = int(parts[2])
                in_vertex = True
            else:
                if int(parts[2]) != 0:
                    raise DataError(
                        f"{path}:{lineno}: unsupported element {parts[1]!r} "
                        "(only vertex data is supported)")
                in_vertex = False
        elif parts[0] == "property":
            if not in_vertex:
                continue
            if parts[1] == "list":
                raise DataError(f"{path}:{lineno}: list properties are not supported")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: malformed property line {line!r}")
            ptype, pname = parts[1], parts[2]
            if ptype not in _PLY_TYPES:
                raise DataError(f"{path}:{lineno}: unknown property type {ptype!r}")
            if pname not in _KNOWN_PROPS:
                raise DataError(f"{path}:{lineno}: unsupported property {pname!r}")
            props.append((pname, _PLY_TYPES[ptype]))
        elif parts[0] == "end_header":
            break
        else:
            raise DataError(f"{path}:{lineno}: unrecognized header line {line!r}")

    if fmt is None:
        raise DataError(f"{path}: PLY header has no format line")
    if count is None:
        raise DataError(f"{path}: PLY header has no vertex element")
    names = [p[0] for p in props]
    for coord in ("x", "y", "z"):
        if coord not in names:
            raise DataError(f"{path}: PLY vertex element lacks property {coord!r}")
    has_rgb = all(c in names for c in ("red", "green", "blue"))
    if any(c in names for c in ("red", "green", "blue")) and not has_rgb:
        raise DataError(f"{path}: incomplete red/green/blue property set")
    return _PlyHeader(fmt, count, props, newline + 1)


def _columns_to_cloud(cols: dict[str, np.ndarray], path: Path):
    pts = np.stack([cols["x"], cols["y"], cols["z"]], axis=1).astype(np.float64)
    bad = np.flatnonzero(~np.isfinite(pts).all(axis=1))
    if bad.size:
        raise DataError(f"{path}: non-finite coordinate in record {int(bad[0])}")
    if "red" in cols:
        rgb = np.stack([cols["red"], cols["green"], cols["blue"]], axis=1)
        if rgb.dtype != np.uint8 and (rgb.min() < 0 or rgb.max() > 255):
            raise DataError(f"{path}: red/green/blue values outside [0, 255]")
        attr = ColorAttr(RGB, rgb.astype(np.uint8))
    elif "intensity" in cols:
        vals = cols["intensity"].astype(np.float64)
        if not np.all(np.isfinite(vals)):
            raise DataError(f"{path}: non-finite intensity value")
        if vals.size and (vals.min() < 0.0 or vals.max() > 1.0):
            vals = _normalize_scalar(vals)
        attr = ColorAttr(INTENSITY, vals)
    elif "signed_distance" in cols:
        vals = cols["signed_distance"].astype(np.float64)
        if not np.all(np.isfinite(vals)):
            raise DataError(f"{path}: non-finite signed_distance value")
        attr = ColorAttr(SIGNED_DISTANCE, vals)
    elif "scalar" in cols:
        vals = cols["scalar"].astype(np.float64)
        if not np.all(np.isfinite(vals)):
            raise DataError(f"{path}: non-finite scalar value")
        attr = ColorAttr(INTENSITY, _normalize_scalar(vals))
    else:
        # colorless clouds default to mid-gray intensity
        attr = ColorAttr(INTENSITY, np.full(pts.shape[0], 0.5))
    labels = None
    if "label" in cols:
        labels = cols["label"].astype(np.int64)
    return PointCloud(pts, attr), labels


def _load_ply(path: Path, expect_fmt: str | None):
    raw = path.read_bytes()
    header = _parse_ply_header(raw, path)
    if expect_fmt is not None and header.fmt != expect_fmt:
        raise DataError(
            f"{path}: file is {header.fmt}, expected {expect_fmt}")
    names = [p[0] for p in header.props]
    if header.fmt == PLY_BINARY_LE:
        dtype = np.dtype([(n, "<" + c) for n, c in header.props])
        need = header.count * dtype.itemsize
        body = raw[header.data_offset:header.data_offset + need]
        if len(body) < need:
            raise DataError(
                f"{path}: binary payload truncated "
                f"({len(body)} bytes, need {need})")
        rec = np.frombuffer(body, dtype=dtype, count=header.count)
        cols = {n: rec[n] for n in names}
    else:
        text = raw[header.data_offset:].decode("ascii", errors="replace")
        rows = np.empty((header.count, len(names)), dtype=np.float64)
        lines = text.splitlines()
        filled = 0
        header_lines = raw[:header.data_offset].count(b"\n")
        for k, line in enumerate(lines):
            stripped = line.strip()
            if not stripped:
                continue
            if filled >= header.count:
                raise DataError(f"{path}: more data rows than declared vertices")
            tokens = stripped.split()
            if len(tokens) != len(names):
                raise DataError(
                    f"{path}:{header_lines + k + 1}: expected {len(names)} "
                    f"values, got {len(tokens)}")
            try:
                rows[filled] = [float(t) for t in tokens]
            except ValueError:
                raise DataError(
                    f"{path}:{header_lines + k + 1}: non-numeric value in {stripped!r}")
            filled += 1
        if filled != header.count:
            raise DataError(
                f"{path}: declared {header.count} vertices, found {filled}")
        cols = {}
        for j, (n, code) in enumerate(header.props):
            col = rows[:, j]
            cols[n] = col.astype(code) if code.startswith(("i", "u")) else col
    return _columns_to_cloud(cols, path)


def _load_xyz(path: Path):
    xs, ss = [], []
    ncols = None
    with path.open("r") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            tokens = stripped.split()
            if len(tokens) not in (3, 4):
                raise DataError(
                    f"{path}:{lineno}: expected 3 or 4 columns, got {len(tokens)}")
            if ncols is None:
                ncols = len(tokens)
            elif len(tokens) != ncols:
                raise DataError(
                    f"{path}:{lineno}: inconsistent column count "
                    f"({len(tokens)} vs {ncols})")
            try:
                vals = [float(t) for t in tokens]
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric value in {stripped!r}")
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}:{lineno}: non-finite coordinate")
            xs.append(vals[:3])
            if ncols == 4:
                ss.append(vals[3])
    pts = np.asarray(xs, dtype=np.float64).reshape(-1, 3)
    if ncols == 4:
        attr = ColorAttr(INTENSITY, _normalize_scalar(np.asarray(ss)))
    else:
        attr = ColorAttr(INTENSITY, np.full(pts.shape[0], 0.5))
    return PointCloud(pts, attr), None


def load_point_cloud(path, fmt: str) -> PointCloud:
    """Load a cloud in the declared format. Point order follows file order."""
    cloud, _ = load_point_cloud_with_labels(path, fmt)
    return cloud


def load_point_cloud_with_labels(path, fmt: str):
    """Like :func:`load_point_cloud` but also returns the per-point integer
    label column when the file has one (else None)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file does not exist: {path}")
    if fmt in (PLY_ASCII, PLY_BINARY_LE):
        return _load_ply(path, fmt)
    if fmt == XYZ_TEXT:
        return _load_xyz(path)
    raise DataError(f"unknown point cloud format {fmt!r}")


def _attr_props(cloud: PointCloud):
    kind = cloud.colors.kind
    if kind == RGB:
        return [("red", "u1"), ("green", "u1"), ("blue", "u1")]
    if kind == INTENSITY:
        return [("intensity", "f8")]
    return [("signed_distance", "f8")]


_PLY_NAMES = {"u1": "uchar", "u4": "uint", "f8": "double"}


def save_point_cloud(cloud: PointCloud, path, fmt: str,
                     labels: np.ndarray | None = None) -> None:
    """Write the cloud; ``labels`` adds a per-point uint ``label`` property."""
    path = Path(path)
    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (len(cloud),):
            raise ValueError("labels must be one integer per point")
        if labels.min(initial=0) < 0:
            raise ValueError("labels must be non-negative")
    props = [("x", "f8"), ("y", "f8"), ("z", "f8")] + _attr_props(cloud)
    if labels is not None:
        props.append(("label", "u4"))

    if fmt == XYZ_TEXT:
        if cloud.colors.kind != INTENSITY:
            raise ValueError("xyz_text supports only intensity clouds")
        with path.open("w") as fh:
            for p, v in zip(cloud.points, cloud.colors.values):
                fh.write(f"{_fmt_float(p[0])} {_fmt_float(p[1])} "
                         f"{_fmt_float(p[2])} {_fmt_float(v)}\n")
        return
    if fmt not in (PLY_ASCII, PLY_BINARY_LE):
        raise ValueError(f"unknown point cloud format {fmt!r}")

    enc = "ascii" if fmt == PLY_ASCII else "binary_little_endian"
    head = io.StringIO()
    head.write("ply\n")
    head.write(f"format {enc} 1.0\n")
    head.write(f"element vertex {len(cloud)}\n")
    for name, code in props:
        head.write(f"property {_PLY_NAMES[code]} {name}\n")
    head.write("end_header\n")

    cols: dict[str, np.ndarray] = {
        "x": cloud.points[:, 0], "y": cloud.points[:, 1], "z": cloud.points[:, 2],
    }
    if cloud.colors.kind == RGB:
        cols["red"] = cloud.colors.values[:, 0]
        cols["green"] = cloud.colors.values[:, 1]
        cols["blue"] = cloud.colors.values[:, 2]
    elif cloud.colors.kind == INTENSITY:
        cols["intensity"] = cloud.colors.values
    else:
        cols["signed_distance"] = cloud.colors.values
    if labels is not None:
        cols["label"] = labels

    if fmt == PLY_BINARY_LE:
        dtype = np.dtype([(n, "<" + c) for n, c in props])
        rec = np.empty(len(cloud), dtype=dtype)
        for name, _ in props:
            rec[name] = cols[name]
        with path.open("wb") as fh:
            fh.write(head.getvalue().encode("ascii"))
            fh.write(rec.tobytes())
    else:
        with path.open("w") as fh:
            fh.write(head.getvalue())
            for i in range(len(cloud)):
                parts = []
                for name, code in props:
                    v = cols[name][i]
                    parts.append(str(int(v)) if code in ("u1", "u4")
                                 else _fmt_float(v))
                fh.write(" ".join(parts) + "\n")
