"""Minimal RANSAC plane and cylinder fitting (multi-instance comparison baseline)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cloud_io import PointCloud
from .errors import NoModelFound
from .normals import NormalField


@dataclass
class RansacConfig:
    model: str  # "plane" or "cylinder"
    inlier_threshold: float = 0.002
    max_iterations: int = 500
    min_inliers: int = 50
    seed: int = 0
    max_radius: Optional[float] = None  # reject cylinder candidates above this radius

    def __post_init__(self):
        if self.model not in ("plane", "cylinder"):
            raise ValueError(f"unknown model {self.model!r}")
        if self.inlier_threshold <= 0:
            raise ValueError("inlier threshold must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _orthonormal_basis(axis):
    helper = np.array([1.0, 0.0, 0.0])
    if abs(axis[0]) > 0.9:
        helper = np.array([0.0, 1.0, 0.0])
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    v = np.cross(axis, u)
    return u, v


def _plane_candidate(points, rng):
    ids = rng.choice(len(points), size=3, replace=False)
    p0, p1, p2 = points[ids]
    normal = np.cross(p1 - p0, p2 - p0)
    norm = np.linalg.norm(normal)
    if norm < 1e-12:
        return None
    normal /= norm
    d = -float(normal @ p0)
    dist = np.abs(points @ normal + d)
    return {"model": "plane", "normal": normal, "d": d}, dist


def _cylinder_candidate(points, normals, valid_ids, rng, max_radius):
    ids = rng.choice(valid_ids, size=2, replace=False)
    p1, p2 = points[ids]
    n1, n2 = normals[ids]
    axis = np.cross(n1, n2)
    norm = np.linalg.norm(axis)
    if norm < 1e-6:
        return None  # parallel normals give no axis
    axis /= norm
    u, v = _orthonormal_basis(axis)
    q1 = np.array([p1 @ u, p1 @ v])
    q2 = np.array([p2 @ u, p2 @ v])
    m1 = np.array([n1 @ u, n1 @ v])
    m2 = np.array([n2 @ u, n2 @ v])
    # intersect the two projected normal lines: q1 + t*m1 = q2 + s*m2
    a = np.column_stack([m1, -m2])
    det = a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]
    if abs(det) < 1e-9:
        return None
    t, _ = np.linalg.solve(a, q2 - q1)
    center2d = q1 + t * m1
    radius = 0.5 * (np.linalg.norm(q1 - center2d) + np.linalg.norm(q2 - center2d))
    if radius < 1e-6 or (max_radius is not None and radius > max_radius):
        return None
    center = center2d[0] * u + center2d[1] * v
    rel = points - center
    axial = rel @ axis
    radial = rel - np.outer(axial, axis)
    dist = np.abs(np.linalg.norm(radial, axis=1) - radius)
    params = {"model": "cylinder", "axis": axis, "point": center, "radius": float(radius)}
    return params, dist


def ransac_fit(cloud: PointCloud, normals: Optional[NormalField], config: RansacConfig):
    """Best model by inlier count after max_iterations; returns (params, inlier ids)."""
    points = cloud.points
    n = len(points)
    rng = np.random.default_rng(config.seed)
    if config.model == "plane":
        if n < 3:
            raise ValueError(f"insufficient points for a plane: {n} < 3")
    else:
        if normals is None:
            raise ValueError("cylinder fitting requires normals")
        valid_ids = np.nonzero(normals.valid)[0]
        if n < 2 or len(valid_ids) < 2:
            raise ValueError("insufficient points with valid normals for a cylinder")

    best_count = -1
    best = None
    for _ in range(config.max_iterations):
        if config.model == "plane":
            cand = _plane_candidate(points, rng)
        else:
            cand = _cylinder_candidate(
                points, normals.normals, valid_ids, rng, config.max_radius
            )
        if cand is None:
            continue
        params, dist = cand
        mask = dist <= config.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count = count
            best = (params, mask)
    if best is None or best_count < config.min_inliers:
        raise NoModelFound(
            f"no {config.model} with >= {config.min_inliers} inliers "
            f"(best candidate had {max(best_count, 0)})"
        )
    params, mask = best
    return params, np.nonzero(mask)[0]


def extract_instances(
    cloud: PointCloud,
    normals: Optional[NormalField],
    config: RansacConfig,
    n_instances: int,
):
    """Repeat ransac_fit, removing inliers between rounds.

    Returns a list of (params, global inlier ids); stops early when a round
    finds no model. Inlier sets are pairwise disjoint by construction.
    """
    if n_instances < 1:
        raise ValueError("n_instances must be >= 1")
    remaining = np.arange(len(cloud))
    results = []
    for round_idx in range(n_instances):
        if len(remaining) == 0:
            break
        sub_cloud = PointCloud(points=cloud.points[remaining])
        sub_normals = None
        if normals is not None:
            sub_normals = NormalField(
                normals=normals.normals[remaining],
                valid=normals.valid[remaining],
                radius=normals.radius,
                viewpoint=normals.viewpoint,
            )
        sub_config = RansacConfig(
            model=config.model,
            inlier_threshold=config.inlier_threshold,
            max_iterations=config.max_iterations,
            min_inliers=config.min_inliers,
            seed=config.seed + 101 * round_idx,
            max_radius=config.max_radius,
        )
        try:
            params, local_ids = ransac_fit(sub_cloud, sub_normals, sub_config)
        except NoModelFound:
            break
        global_ids = remaining[local_ids]
        results.append((params, global_ids))
        keep = np.ones(len(remaining), dtype=bool)
        keep[local_ids] = False
        remaining = remaining[keep]
    return results
