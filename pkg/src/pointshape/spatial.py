"""Neighbor queries over unorganized clouds.

The index wraps a kD-tree (scipy cKDTree). Radius queries use closed-ball
semantics (distance <= r) and never return the query point's own id, matching
the brute-force oracle below.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .cloud_io import PointCloud


class SpatialIndex:
    """Immutable kD-tree over a cloud's points; safe for concurrent reads."""

    def __init__(self, cloud: PointCloud):
        if len(cloud) == 0:
            raise ValueError("empty cloud")
        self._points = cloud.points
        self._tree = cKDTree(cloud.points)
        self.size = len(cloud)

    def _check_id(self, point_id):
        if not 0 <= point_id < self.size:
            raise IndexError(f"invalid point id {point_id} for cloud of {self.size}")

    def radius_neighbors(self, point_id: int, r: float) -> np.ndarray:
        """Ids of all points with distance <= r from the query point, self excluded."""
        self._check_id(point_id)
        if r <= 0:
            raise ValueError(f"radius must be positive, got {r}")
        ids = self._tree.query_ball_point(self._points[point_id], r)
        return np.asarray([i for i in ids if i != point_id], dtype=np.intp)

    def radius_neighbors_all(self, r: float) -> list:
        """Radius neighbors for every point at once (self excluded per point)."""
        if r <= 0:
            raise ValueError(f"radius must be positive, got {r}")
        result = self._tree.query_ball_point(self._points, r)
        return [
            np.asarray([j for j in ids if j != i], dtype=np.intp)
            for i, ids in enumerate(result)
        ]

    def k_nearest(self, point_id: int, k: int) -> np.ndarray:
        """The k nearest other points, ascending by distance.

        If the cloud holds fewer than k+1 points, all other points are returned.
        """
        self._check_id(point_id)
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        kk = min(k + 1, self.size)
        _, ids = self._tree.query(self._points[point_id], k=kk)
        ids = np.atleast_1d(ids)
        ids = ids[ids != point_id]
        return ids[:k].astype(np.intp)

    def k_nearest_all(self, k: int) -> np.ndarray:
        """(n, k) nearest-neighbor ids for every point; requires n > k."""
        if k < 1:
            raise ValueError(f"k must be >= 1, got {k}")
        if self.size <= k:
            raise ValueError(f"cloud of {self.size} points cannot supply {k} neighbors each")
        _, ids = self._tree.query(self._points, k=k + 1)
        out = np.empty((self.size, k), dtype=np.intp)
        for i in range(self.size):
            row = ids[i]
            row = row[row != i]
            out[i] = row[:k]
        return out


def build_index(cloud: PointCloud) -> SpatialIndex:
    return SpatialIndex(cloud)


def brute_force_radius(cloud: PointCloud, point_id: int, r: float) -> np.ndarray:
    """O(n) reference implementation of radius_neighbors (test oracle)."""
    if not 0 <= point_id < len(cloud):
        raise IndexError(f"invalid point id {point_id} for cloud of {len(cloud)}")
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    d2 = np.sum((cloud.points - cloud.points[point_id]) ** 2, axis=1)
    ids = np.nonzero(d2 <= r * r)[0]
    return ids[ids != point_id].astype(np.intp)


def median_spacing(cloud: PointCloud, index: SpatialIndex | None = None) -> float:
    """Median distance to the nearest neighbor; a density proxy for radius defaults."""
    idx = index if index is not None else SpatialIndex(cloud)
    if idx.size < 2:
        raise ValueError("spacing needs at least 2 points")
    d, _ = idx._tree.query(cloud.points, k=2)
    return float(np.median(d[:, 1]))
