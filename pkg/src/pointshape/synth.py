"""Synthetic clouds with exact ground truth.

Generators return (cloud, labels, viewpoint). Clouds carry their analytic
normals so tests can compare estimates against the true surface. Noise is a
Gaussian displacement along the local analytic normal (sensor-style axial
noise); labels are always computed from the noise-free geometry.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .cloud_io import CURVED, EDGE, PLANAR, PointCloud

EDGE_BAND_FACTOR = 2.0  # crease band half-width, in multiples of the resolution


def gen_plane(nx: int, ny: int, res: float, noise_sigma: float = 0.0, seed: int = 0):
    """Axis-aligned grid in z=0; labels all planar; viewpoint above the center."""
    if nx < 2 or ny < 2:
        raise ValueError("plane needs nx, ny >= 2")
    if res <= 0:
        raise ValueError("resolution must be positive")
    xs, ys = np.meshgrid(np.arange(nx) * res, np.arange(ny) * res, indexing="ij")
    pts = np.column_stack([xs.ravel(), ys.ravel(), np.zeros(nx * ny)])
    normals = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        pts = pts + normals * rng.normal(0.0, noise_sigma, size=len(pts))[:, None]
    cloud = PointCloud(points=pts, normals=normals)
    labels = np.full(len(pts), PLANAR, dtype=np.uint8)
    extent = max(nx - 1, ny - 1) * res
    viewpoint = np.array([(nx - 1) * res / 2, (ny - 1) * res / 2, max(extent, 10 * res)])
    return cloud, labels, viewpoint


def gen_cylinder(radius: float, height: float, res: float, noise_sigma: float = 0.0, seed: int = 0):
    """Lateral cylinder surface around the z axis; labels all curved.

    Arc spacing ~= res and axial spacing = res. The viewpoint sits on the
    axis above the cylinder, which orients every estimated normal
    consistently (inward); angle folding makes the sign irrelevant downstream.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if not 0 < res < radius:
        raise ValueError("resolution must satisfy 0 < res < radius")
    n_theta = max(3, int(round(2.0 * math.pi * radius / res)))
    n_z = max(2, int(round(height / res)))
    theta = np.arange(n_theta) * (2.0 * math.pi / n_theta)
    z = np.arange(n_z) * res
    tt, zz = np.meshgrid(theta, z, indexing="ij")
    ct, st = np.cos(tt.ravel()), np.sin(tt.ravel())
    normals = np.column_stack([ct, st, np.zeros(ct.size)])
    rr = np.full(ct.size, radius)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        rr = rr + rng.normal(0.0, noise_sigma, size=ct.size)
    pts = np.column_stack([rr * ct, rr * st, zz.ravel()])
    cloud = PointCloud(points=pts, normals=normals)
    labels = np.full(len(pts), CURVED, dtype=np.uint8)
    viewpoint = np.array([0.0, 0.0, 2.0 * max(height, res)])
    return cloud, labels, viewpoint


def gen_box_scene(edge: float, res: float, noise_sigma: float = 0.0, seed: int = 0):
    """Three mutually orthogonal square faces sharing the corner at the origin.

    Points within EDGE_BAND_FACTOR * res of one of the three crease lines are
    labeled edge; shared crease samples are deduplicated. Labels come from the
    noise-free coordinates.
    """
    if edge <= 0:
        raise ValueError("edge length must be positive")
    if not res < edge / 10:
        raise ValueError("resolution must be < edge/10")
    n = int(round(edge / res)) + 1
    seen = set()
    keys = []
    normals = []
    face_defs = (
        (lambda a, b: (a, b, 0), (0.0, 0.0, 1.0)),  # z = 0
        (lambda a, b: (a, 0, b), (0.0, 1.0, 0.0)),  # y = 0
        (lambda a, b: (0, a, b), (1.0, 0.0, 0.0)),  # x = 0
    )
    for make_key, nrm in face_defs:
        for a in range(n):
            for b in range(n):
                key = make_key(a, b)
                if key not in seen:
                    seen.add(key)
                    keys.append(key)
                    normals.append(nrm)
    grid = np.asarray(keys, dtype=np.float64)
    pts = grid * res
    normals = np.asarray(normals)

    # distance to the crease lines along the x, y and z axes
    d_x = np.hypot(pts[:, 1], pts[:, 2])
    d_y = np.hypot(pts[:, 0], pts[:, 2])
    d_z = np.hypot(pts[:, 0], pts[:, 1])
    band = EDGE_BAND_FACTOR * res * (1 + 1e-9)
    is_edge = np.minimum(np.minimum(d_x, d_y), d_z) <= band
    labels = np.where(is_edge, EDGE, PLANAR).astype(np.uint8)

    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        pts = pts + normals * rng.normal(0.0, noise_sigma, size=len(pts))[:, None]
    cloud = PointCloud(points=pts, normals=normals)
    viewpoint = np.array([1.5 * edge] * 3)
    return cloud, labels, viewpoint


def merge_parts(parts):
    """Concatenate [(cloud, labels, offset), ...] into one cloud + label mask."""
    all_pts, all_nrm, all_lab = [], [], []
    for cloud, labels, offset in parts:
        off = np.zeros(3) if offset is None else np.asarray(offset, dtype=np.float64)
        all_pts.append(cloud.points + off)
        all_nrm.append(cloud.normals)
        all_lab.append(labels)
    if any(nrm is None for nrm in all_nrm):
        normals = None
    else:
        normals = np.vstack(all_nrm)
    merged = PointCloud(points=np.vstack(all_pts), normals=normals)
    return merged, np.concatenate(all_lab)


def gen_scene(spec: dict):
    """Build a composite scene from a spec dict.

    Spec schema: {"primitives": [...], "noise_sigma": float, "seed": int,
    "viewpoint": [x, y, z] (optional)}. Each primitive is one of
    {"type": "plane", "nx", "ny", "res", "origin"?},
    {"type": "cylinder", "radius", "height", "res", "origin"?} or
    {"type": "box", "edge", "res", "origin"?}.
    """
    try:
        prims = spec["primitives"]
        noise = float(spec.get("noise_sigma", 0.0))
        seed = int(spec.get("seed", 0))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad scene spec: {exc}") from None
    if not isinstance(prims, list) or not prims:
        raise ValueError("bad scene spec: 'primitives' must be a non-empty list")
    if noise < 0:
        raise ValueError("bad scene spec: noise_sigma must be >= 0")
    parts = []
    for i, prim in enumerate(prims):
        kind = prim.get("type")
        prim_seed = seed + 31 * i
        try:
            if kind == "plane":
                cloud, labels, _ = gen_plane(
                    int(prim["nx"]), int(prim["ny"]), float(prim["res"]), noise, prim_seed
                )
            elif kind == "cylinder":
                cloud, labels, _ = gen_cylinder(
                    float(prim["radius"]), float(prim["height"]), float(prim["res"]),
                    noise, prim_seed,
                )
            elif kind == "box":
                cloud, labels, _ = gen_box_scene(
                    float(prim["edge"]), float(prim["res"]), noise, prim_seed
                )
            else:
                raise ValueError(f"unknown primitive type {kind!r}")
        except KeyError as exc:
            raise ValueError(f"bad scene spec: primitive {i} missing {exc}") from None
        parts.append((cloud, labels, prim.get("origin")))
    cloud, labels = merge_parts(parts)
    if "viewpoint" in spec:
        viewpoint = np.asarray(spec["viewpoint"], dtype=np.float64)
    else:
        lo, hi = cloud.points.min(axis=0), cloud.points.max(axis=0)
        center = (lo + hi) / 2
        viewpoint = np.array([center[0], center[1], hi[2] + 2.0 * float(np.max(hi - lo))])
    return cloud, labels, viewpoint


def load_scene_spec(path) -> dict:
    with open(path, "r", encoding="ascii") as fh:
        try:
            spec = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"bad scene spec {path}: {exc}") from None
    if not isinstance(spec, dict):
        raise ValueError(f"bad scene spec {path}: expected a JSON object")
    return spec
