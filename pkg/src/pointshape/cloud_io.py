"""Point cloud and label file I/O.

Supported cloud formats are deliberately ASCII-only so fixtures stay diffable:
PCD v0.7 (``FIELDS x y z [normal_x normal_y normal_z]``), PLY 1.0 with a
vertex element, and plain whitespace-separated xyz. Label files are one
integer class id per line, index-aligned with the cloud file they belong to.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ParseError

# Label class ids.
PLANAR = 0
CURVED = 1
EDGE = 2
UNLABELED = 255
VALID_CLASS_IDS = frozenset({PLANAR, CURVED, EDGE, UNLABELED})

_UNIT_NORM_TOL = 1e-6


@dataclass
class PointCloud:
    """Unorganized point cloud: coordinates in meters, optional unit normals."""

    points: np.ndarray
    normals: Optional[np.ndarray] = None
    valid: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.float64)
        if self.points.ndim != 2 or self.points.shape[1] != 3:
            raise ValueError(f"points must be (n, 3), got {self.points.shape}")
        if len(self.points) == 0:
            raise ValueError("empty cloud: at least one point is required")
        if not np.isfinite(self.points).all():
            raise ValueError("non-finite coordinate in point cloud")
        if self.normals is not None:
            self.normals = np.asarray(self.normals, dtype=np.float64)
            if self.normals.shape != self.points.shape:
                raise ValueError(
                    f"normals shape {self.normals.shape} does not match points {self.points.shape}"
                )
            norms = np.linalg.norm(self.normals, axis=1)
            if not np.all(np.abs(norms - 1.0) <= _UNIT_NORM_TOL):
                worst = int(np.argmax(np.abs(norms - 1.0)))
                raise ValueError(f"normal {worst} is not unit length (|n|={norms[worst]:.8f})")
        if self.valid is None:
            self.valid = np.ones(len(self.points), dtype=bool)
        else:
            self.valid = np.asarray(self.valid, dtype=bool)
            if self.valid.shape != (len(self.points),):
                raise ValueError("valid flags must be one bool per point")

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None


def _infer_format(path, fmt):
    if fmt is not None:
        key = fmt.lower().replace("-ascii", "")
        if key in ("pcd", "ply", "xyz"):
            return key
        raise ValueError(f"unknown format {fmt!r}; expected pcd-ascii, ply-ascii or xyz")
    suffix = Path(path).suffix.lower().lstrip(".")
    if suffix in ("pcd", "ply", "xyz"):
        return suffix
    raise ValueError(f"cannot infer format from {path!r}; pass format= explicitly")


def load_cloud(path, format: Optional[str] = None) -> PointCloud:
    """Load a cloud from an ASCII pcd/ply/xyz file.

    Raises OSError on I/O problems, ParseError (with line number) on malformed
    content, and ValueError on non-finite coordinates or non-unit normals.
    """
    fmt = _infer_format(path, format)
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    if fmt == "xyz":
        return _parse_xyz(lines, path)
    if fmt == "pcd":
        return _parse_pcd(lines, path)
    return _parse_ply(lines, path)


def save_cloud(cloud: PointCloud, path, format: Optional[str] = None) -> None:
    """Write a cloud with 6 fractional digits per coordinate."""
    fmt = _infer_format(path, format)
    if fmt == "xyz" and cloud.has_normals:
        raise ValueError("unsupported fields: xyz format cannot store normals")
    writer = {"xyz": _write_xyz, "pcd": _write_pcd, "ply": _write_ply}[fmt]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        writer(cloud, fh)


def _parse_floats(token_rows, path, expect_cols):
    out = np.empty((len(token_rows), expect_cols), dtype=np.float64)
    for i, (lineno, tokens) in enumerate(token_rows):
        if len(tokens) != expect_cols:
            raise ParseError(
                f"expected {expect_cols} values, got {len(tokens)}", path=path, line=lineno
            )
        try:
            out[i] = [float(t) for t in tokens]
        except ValueError:
            raise ParseError(f"not a number: {tokens!r}", path=path, line=lineno) from None
    return out


def _check_finite(values, path):
    if not np.isfinite(values).all():
        bad = int(np.nonzero(~np.isfinite(values).all(axis=1))[0][0])
        raise ValueError(f"{path}: non-finite coordinate at record {bad}")


def _parse_xyz(lines, path):
    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if ln.strip()]
    if not rows:
        raise ParseError("no points in file", path=path)
    coords = _parse_floats(rows, path, 3)
    _check_finite(coords, path)
    return PointCloud(points=coords)


_PCD_XYZ = ("x", "y", "z")
_PCD_NORMALS = ("normal_x", "normal_y", "normal_z")


def _parse_pcd(lines, path):
    fields = None
    n_points = None
    data_start = None
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, _, rest = line.partition(" ")
        key = key.upper()
        if key == "FIELDS":
            fields = rest.split()
        elif key == "POINTS":
            try:
                n_points = int(rest)
            except ValueError:
                raise ParseError(f"bad POINTS value {rest!r}", path=path, line=i + 1) from None
        elif key == "DATA":
            if rest.strip().lower() != "ascii":
                raise ValueError(f"{path}: binary PCD is not supported (DATA {rest.strip()})")
            data_start = i + 1
            break
    if fields is None or n_points is None or data_start is None:
        raise ParseError("incomplete PCD header (need FIELDS, POINTS, DATA)", path=path)
    for name in _PCD_XYZ:
        if name not in fields:
            raise ParseError(f"missing field {name!r} in FIELDS", path=path)
    has_normals = all(name in fields for name in _PCD_NORMALS)

    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if i >= data_start and ln.strip()]
    if len(rows) != n_points:
        raise ParseError(
            f"header declares POINTS {n_points} but file has {len(rows)} records", path=path
        )
    values = _parse_floats(rows, path, len(fields))
    ix = [fields.index(name) for name in _PCD_XYZ]
    coords = values[:, ix]
    _check_finite(coords, path)
    normals = None
    if has_normals:
        normals = values[:, [fields.index(name) for name in _PCD_NORMALS]]
        _check_finite(normals, path)
    return PointCloud(points=coords, normals=normals)


def _parse_ply(lines, path):
    if not lines or lines[0].strip() != "ply":
        raise ParseError("not a PLY file (missing 'ply' magic)", path=path, line=1)
    n_vertices = None
    properties = []
    in_vertex = False
    header_end = None
    for i, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if line.startswith("comment"):
            continue
        if line.startswith("format"):
            if "ascii" not in line:
                raise ValueError(f"{path}: binary PLY is not supported ({line})")
        elif line.startswith("element"):
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"bad element line {line!r}", path=path, line=i)
            in_vertex = parts[1] == "vertex"
            if in_vertex:
                n_vertices = int(parts[2])
            elif int(parts[2]) != 0:
                raise ParseError(f"unsupported element {parts[1]!r} with count > 0", path=path, line=i)
        elif line.startswith("property") and in_vertex:
            properties.append(line.split()[-1])
        elif line == "end_header":
            header_end = i
            break
    if n_vertices is None or header_end is None:
        raise ParseError("incomplete PLY header", path=path)
    for name in ("x", "y", "z"):
        if name not in properties:
            raise ParseError(f"vertex element lacks property {name!r}", path=path)
    has_normals = all(name in properties for name in ("nx", "ny", "nz"))

    rows = [(i + 1, ln.split()) for i, ln in enumerate(lines) if i >= header_end and ln.strip()]
    if len(rows) != n_vertices:
        raise ParseError(
            f"header declares {n_vertices} vertices but file has {len(rows)} records", path=path
        )
    values = _parse_floats(rows, path, len(properties))
    coords = values[:, [properties.index(n) for n in ("x", "y", "z")]]
    _check_finite(coords, path)
    normals = None
    if has_normals:
        normals = values[:, [properties.index(n) for n in ("nx", "ny", "nz")]]
        _check_finite(normals, path)
    return PointCloud(points=coords, normals=normals)


def _fmt_row(row):
    return " ".join(f"{v:.6f}" for v in row)


def _write_xyz(cloud, fh):
    for row in cloud.points:
        fh.write(_fmt_row(row) + "\n")


def _write_pcd(cloud, fh):
    n = len(cloud)
    if cloud.has_normals:
        fields, count = "x y z normal_x normal_y normal_z", 6
        data = np.hstack([cloud.points, cloud.normals])
    else:
        fields, count = "x y z", 3
        data = cloud.points
    fh.write("# .PCD v0.7 - Point Cloud Data file format\n")
    fh.write("VERSION 0.7\n")
    fh.write(f"FIELDS {fields}\n")
    fh.write("SIZE" + " 4" * count + "\n")
    fh.write("TYPE" + " F" * count + "\n")
    fh.write("COUNT" + " 1" * count + "\n")
    fh.write(f"WIDTH {n}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS {n}\nDATA ascii\n")
    for row in data:
        fh.write(_fmt_row(row) + "\n")


def _write_ply(cloud, fh):
    n = len(cloud)
    fh.write("ply\nformat ascii 1.0\n")
    fh.write(f"element vertex {n}\n")
    fh.write("property float x\nproperty float y\nproperty float z\n")
    if cloud.has_normals:
        fh.write("property float nx\nproperty float ny\nproperty float nz\n")
        data = np.hstack([cloud.points, cloud.normals])
    else:
        data = cloud.points
    fh.write("end_header\n")
    for row in data:
        fh.write(_fmt_row(row) + "\n")


def save_colored_ply(points: np.ndarray, colors: np.ndarray, path) -> None:
    """Write points with per-point uchar RGB colors (for visual inspection)."""
    points = np.asarray(points, dtype=np.float64)
    colors = np.asarray(colors)
    if colors.shape != points.shape:
        raise ValueError("colors must be (n, 3) aligned with points")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        fh.write("property uchar red\nproperty uchar green\nproperty uchar blue\n")
        fh.write("end_header\n")
        for p, c in zip(points, colors):
            fh.write(f"{p[0]:.6f} {p[1]:.6f} {p[2]:.6f} {int(c[0])} {int(c[1])} {int(c[2])}\n")


def load_labels(path) -> np.ndarray:
    """Load a per-point label mask (uint8), one class id per line."""
    with open(path, "r", encoding="ascii") as fh:
        lines = fh.read().splitlines()
    labels = []
    for i, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        try:
            value = int(line)
        except ValueError:
            raise ParseError(f"not an integer label: {line!r}", path=path, line=i + 1) from None
        if value not in VALID_CLASS_IDS:
            raise ValueError(f"{path}: line {i + 1}: unknown class id {value}")
        labels.append(value)
    return np.asarray(labels, dtype=np.uint8)


def save_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels)
    bad = set(np.unique(labels).tolist()) - VALID_CLASS_IDS
    if bad:
        raise ValueError(f"unknown class ids {sorted(bad)}")
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for v in labels:
            fh.write(f"{int(v)}\n")
