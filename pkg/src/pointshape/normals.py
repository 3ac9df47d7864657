"""Surface normal estimation from local covariance.

The normal at a point is the eigenvector of the smallest eigenvalue of the
covariance of the point and its radius-neighbors, sign-oriented toward a
viewpoint. The 3x3 symmetric eigenproblem is solved in closed form
(trigonometric characteristic polynomial) with a cyclic Jacobi fallback for
near-degenerate spectra.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud_io import PointCloud
from .spatial import SpatialIndex

_TWO_PI_3 = 2.0 * math.pi / 3.0
_JACOBI_TOL = 1e-12
_JACOBI_MAX_SWEEPS = 50
_FALLBACK_SEPARATION = 1e-9
_RESIDUAL_TOL = 1e-6
_DEGENERATE_RATIO = 1e-12


def covariance(points) -> np.ndarray:
    """Covariance of points about their centroid (division by N)."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"points must be (n, 3), got {pts.shape}")
    if len(pts) < 3:
        raise ValueError(f"too few points for a covariance: {len(pts)} < 3")
    d = pts - pts.mean(axis=0)
    return (d.T @ d) / len(pts)


def _eigvals_sym3(a00, a01, a02, a11, a12, a22):
    """Ascending eigenvalues of a symmetric 3x3 matrix, closed form."""
    p1 = a01 * a01 + a02 * a02 + a12 * a12
    if p1 == 0.0:
        return tuple(sorted((a00, a11, a22)))
    q = (a00 + a11 + a22) / 3.0
    b00, b11, b22 = a00 - q, a11 - q, a22 - q
    p2 = b00 * b00 + b11 * b11 + b22 * b22 + 2.0 * p1
    p = math.sqrt(p2 / 6.0)
    inv = 1.0 / p
    c00, c01, c02 = b00 * inv, a01 * inv, a02 * inv
    c11, c12, c22 = b11 * inv, a12 * inv, b22 * inv
    det = (
        c00 * (c11 * c22 - c12 * c12)
        - c01 * (c01 * c22 - c12 * c02)
        + c02 * (c01 * c12 - c11 * c02)
    )
    r = det / 2.0
    if r <= -1.0:
        phi = math.pi / 3.0
    elif r >= 1.0:
        phi = 0.0
    else:
        phi = math.acos(r) / 3.0
    hi = q + 2.0 * p * math.cos(phi)
    lo = q + 2.0 * p * math.cos(phi + _TWO_PI_3)
    mid = 3.0 * q - hi - lo
    return lo, mid, hi


def _jacobi_sym3(m: np.ndarray):
    """Cyclic Jacobi diagonalization; returns (eigvals ascending, eigvecs columns)."""
    a = m.astype(np.float64).copy()
    v = np.eye(3)
    for _ in range(_JACOBI_MAX_SWEEPS):
        off = math.sqrt(a[0, 1] ** 2 + a[0, 2] ** 2 + a[1, 2] ** 2)
        if off < _JACOBI_TOL:
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[p, q]
            if abs(apq) < _JACOBI_TOL * 1e-3:
                continue
            theta = (a[q, q] - a[p, p]) / (2.0 * apq)
            t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
            c = 1.0 / math.sqrt(t * t + 1.0)
            s = t * c
            rot = np.eye(3)
            rot[p, p] = rot[q, q] = c
            rot[p, q] = s
            rot[q, p] = -s
            a = rot.T @ a @ rot
            v = v @ rot
    order = np.argsort(np.diag(a))
    return np.diag(a)[order], v[:, order]


def smallest_eigenpair(m) -> tuple:
    """(eigenvalues ascending, unit eigenvector of the smallest eigenvalue)."""
    a = np.asarray(m, dtype=np.float64)
    if a.shape != (3, 3):
        raise ValueError(f"expected a 3x3 matrix, got {a.shape}")
    if not np.isfinite(a).all():
        raise ValueError("matrix has non-finite entries")
    scale = float(np.max(np.abs(a)))
    if scale == 0.0:
        return np.zeros(3), np.array([0.0, 0.0, 1.0])
    s = a / scale
    lo, mid, hi = _eigvals_sym3(s[0, 0], s[0, 1], s[0, 2], s[1, 1], s[1, 2], s[2, 2])
    vec = None
    if mid - lo >= _FALLBACK_SEPARATION:
        # rows of (S - lo*I); the two most independent rows give the eigenvector
        r0 = np.array([s[0, 0] - lo, s[0, 1], s[0, 2]])
        r1 = np.array([s[0, 1], s[1, 1] - lo, s[1, 2]])
        r2 = np.array([s[0, 2], s[1, 2], s[2, 2] - lo])
        crosses = [np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)]
        norms = [np.linalg.norm(cv) for cv in crosses]
        best = int(np.argmax(norms))
        if norms[best] > 1e-12:
            vec = crosses[best] / norms[best]
    if vec is None or np.linalg.norm(s @ vec - lo * vec) > _RESIDUAL_TOL:
        w, v = _jacobi_sym3(s)
        lo, mid, hi = w
        vec = v[:, 0]
    eigvals = np.array([lo, mid, hi]) * scale
    return eigvals, vec


def smallest_eigenvector(m) -> np.ndarray:
    """Unit eigenvector for the smallest eigenvalue; sign is unspecified."""
    return smallest_eigenpair(m)[1]


@dataclass
class NormalField:
    """Per-point unit normals with validity flags and the parameters used."""

    normals: np.ndarray
    valid: np.ndarray
    radius: float
    viewpoint: np.ndarray

    def __post_init__(self):
        self.normals = np.asarray(self.normals, dtype=np.float64)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.viewpoint = np.asarray(self.viewpoint, dtype=np.float64)

    def __len__(self) -> int:
        return len(self.normals)


def estimate_all_normals(
    cloud: PointCloud,
    index: SpatialIndex,
    r: float,
    viewpoint=(0.0, 0.0, 0.0),
    min_neighbors: int = 5,
) -> NormalField:
    """Estimate a normal for every point with enough radius-neighbors.

    Points with fewer than min_neighbors neighbors, or with a degenerate
    (rank < 2) neighborhood, are flagged invalid rather than raising.
    The covariance includes the query point itself.
    """
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if min_neighbors < 3:
        raise ValueError(f"min_neighbors must be >= 3, got {min_neighbors}")
    vp = np.asarray(viewpoint, dtype=np.float64)
    pts = cloud.points
    n = len(cloud)
    normals = np.zeros((n, 3))
    valid = np.zeros(n, dtype=bool)
    neighbor_lists = index.radius_neighbors_all(r)
    for i in range(n):
        if not cloud.valid[i]:
            continue
        nbr = neighbor_lists[i]
        if len(nbr) < min_neighbors:
            continue
        local = pts[np.concatenate(([i], nbr))]
        d = local - local.mean(axis=0)
        cov = (d.T @ d) / len(local)
        eigvals, vec = smallest_eigenpair(cov)
        if eigvals[2] <= 0 or eigvals[1] < _DEGENERATE_RATIO * eigvals[2]:
            continue
        if np.dot(vp - pts[i], vec) < 0:
            vec = -vec
        normals[i] = vec
        valid[i] = True
    return NormalField(normals=normals, valid=valid, radius=r, viewpoint=vp)
