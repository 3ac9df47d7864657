"""Inter-normal angle statistics per point.

For each point, the angles between its normal and its radius-neighbors'
normals are folded to [0, 90] degrees (eigenvector signs are arbitrary at
grazing incidence, so antipodal normals count as parallel), passed through
statistical outlier rejection, and summarized as a (mean, population-std)
pair. These pairs are what the shape histogram bins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .cloud_io import PointCloud
from .normals import NormalField
from .spatial import SpatialIndex

_DEG = 180.0 / math.pi
_SIGMA_FLOOR = 1e-9


@dataclass
class InadPair:
    mu: float
    sigma: float
    inlier_count: int


@dataclass
class InadField:
    """Per-point (mu, sigma) in degrees, with validity and the parameters used."""

    mu: np.ndarray
    sigma: np.ndarray
    inlier_count: np.ndarray
    valid: np.ndarray
    radius: float
    outlier_rate: float
    rejection_passes: int = 1

    def __len__(self) -> int:
        return len(self.mu)


def inter_normal_angles(field: NormalField, point_id: int, neighbor_ids) -> np.ndarray:
    """Folded angles (degrees) between the point's normal and each valid neighbor normal.

    Neighbors with invalid normals are skipped; an invalid center normal raises.
    """
    if not field.valid[point_id]:
        raise ValueError(f"invalid center normal at point {point_id}")
    nbr = np.asarray(neighbor_ids, dtype=np.intp)
    ok = field.valid[nbr]
    if not ok.all():
        nbr = nbr[ok]
    d = field.normals[nbr] @ field.normals[point_id]
    np.abs(d, out=d)  # fold: min(a, 180-a) == arccos(|dot|)
    np.minimum(d, 1.0, out=d)
    np.arccos(d, out=d)
    d *= _DEG
    return d


def _reject_pass(values: np.ndarray, c: float):
    """One rejection window pass. Returns (survivors, emptied_flag)."""
    n = values.shape[0]
    mu = values.sum() / n
    dev = values - mu
    sigma = math.sqrt((dev @ dev) / n)
    if sigma < _SIGMA_FLOOR:
        return values, False
    np.abs(dev, out=dev)
    keep = dev <= c * sigma
    kept = values[keep]
    if kept.shape[0] == 0:
        # caller decides; report the survivor the guard would retain
        return values[np.argmin(dev) : np.argmin(dev) + 1], True
    return kept, False


def reject_outliers(alphas, c: float) -> np.ndarray:
    """Keep angles within c population-sigmas of the mean.

    With sigma below 1e-9 every value is an inlier. The result is never
    empty: if the window excludes everything, the value closest to the mean
    is retained.
    """
    values = np.asarray(alphas, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] == 0:
        raise ValueError("alphas must be a non-empty 1-D sequence")
    if c <= 0:
        raise ValueError(f"outlier rate must be positive, got {c}")
    kept, _ = _reject_pass(values, c)
    return kept


def reject_outliers_iterated(alphas, c: float, passes: int = 1) -> np.ndarray:
    """Apply reject_outliers up to `passes` times.

    Iteration stops early when a pass changes nothing or when the next window
    would reject every remaining value (the previous survivor set is kept in
    that case; a lone value is not representative of a bimodal standoff).
    """
    if passes < 1:
        raise ValueError(f"passes must be >= 1, got {passes}")
    cur = reject_outliers(alphas, c)
    for _ in range(passes - 1):
        kept, emptied = _reject_pass(cur, c)
        if emptied or kept.shape[0] == cur.shape[0]:
            break
        cur = kept
    return cur


def inad_pair(alphas) -> InadPair:
    """Mean and population standard deviation of the (inlier) angles."""
    values = np.asarray(alphas, dtype=np.float64)
    if values.ndim != 1 or values.shape[0] == 0:
        raise ValueError("alphas must be a non-empty 1-D sequence")
    n = values.shape[0]
    mu = values.sum() / n
    dev = values - mu
    sigma = math.sqrt((dev @ dev) / n)
    return InadPair(mu=float(mu), sigma=float(sigma), inlier_count=n)


def compute_inad_field(
    cloud: PointCloud,
    normals: NormalField,
    index: SpatialIndex,
    r: float,
    c: float = 1.0,
    rejection_passes: int = 1,
) -> InadField:
    """INAD pair for every point: radius neighbors -> angles -> rejection -> (mu, sigma).

    Points with an invalid normal or no valid-neighbor angles are flagged
    invalid, not fatal.
    """
    if r <= 0:
        raise ValueError(f"radius must be positive, got {r}")
    if c <= 0:
        raise ValueError(f"outlier rate must be positive, got {c}")
    n = len(cloud)
    if len(normals) != n:
        raise ValueError("normal field length does not match cloud")
    mu = np.zeros(n)
    sigma = np.zeros(n)
    count = np.zeros(n, dtype=np.intp)
    valid = np.zeros(n, dtype=bool)
    neighbor_lists = index.radius_neighbors_all(r)
    for i in range(n):
        if not normals.valid[i] or not cloud.valid[i]:
            continue
        nbr = neighbor_lists[i]
        if len(nbr) == 0:
            continue
        alphas = inter_normal_angles(normals, i, nbr)
        if alphas.shape[0] == 0:
            continue
        inliers = reject_outliers_iterated(alphas, c, rejection_passes)
        pair = inad_pair(inliers)
        mu[i] = pair.mu
        sigma[i] = pair.sigma
        count[i] = pair.inlier_count
        valid[i] = True
    return InadField(
        mu=mu,
        sigma=sigma,
        inlier_count=count,
        valid=valid,
        radius=r,
        outlier_rate=c,
        rejection_passes=rejection_passes,
    )


def field_to_csv(field: InadField, path) -> None:
    """Dump a field as point_id,mu,sigma,valid rows (debug aid)."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("point_id,mu,sigma,valid\n")
        for i in range(len(field)):
            if field.valid[i]:
                fh.write(f"{i},{field.mu[i]:.9g},{field.sigma[i]:.9g},1\n")
            else:
                fh.write(f"{i},nan,nan,0\n")
