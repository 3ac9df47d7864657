"""Downstream tasks: binary planar/curved classification and edge detection.

Both tasks back-project the shape histogram of a planar sample surface and
threshold the resulting likelihood. The opposing class (curved, edge) is
scored as the complement of the planar likelihood, which makes the two
class likelihoods sum to one by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .cloud_io import CURVED, EDGE, PLANAR, UNLABELED, PointCloud
from .histogram import (
    DEFAULT_MU_MAX,
    DEFAULT_SIGMA_MAX,
    LikelihoodField,
    ShapeHistogram,
    back_project,
    build_histogram,
    complement,
)
from .inad import InadField, compute_inad_field
from .normals import estimate_all_normals
from .spatial import SpatialIndex, build_index, median_spacing

# default ratio between the normal-estimation radius and the point spacing
NORMAL_RADIUS_SPACING_FACTOR = 1.5


@dataclass
class TaskConfig:
    """Parameters for the classification and edge-detection pipelines.

    r_normals is the neighborhood radius for normal estimation; None selects
    NORMAL_RADIUS_SPACING_FACTOR times the cloud's median point spacing.
    """

    r_classify: float = 0.03
    r_edge: float = 0.006
    outlier_rate: float = 1.0
    rejection_passes: int = 2
    k_mu: int = 10
    k_sigma: int = 10
    tau: float = 0.5
    mu_max: float = DEFAULT_MU_MAX
    sigma_max: float = DEFAULT_SIGMA_MAX
    r_normals: Optional[float] = None
    min_neighbors: int = 5

    def __post_init__(self):
        if not self.r_edge < self.r_classify:
            raise ValueError("r_edge must be smaller than r_classify")
        if not 0 < self.tau < 1:
            raise ValueError("tau must lie strictly between 0 and 1")
        if self.outlier_rate <= 0:
            raise ValueError("outlier rate must be positive")

    def with_overrides(self, **kwargs) -> "TaskConfig":
        return replace(self, **kwargs)


def resolve_normal_radius(config: TaskConfig, cloud: PointCloud, index: SpatialIndex) -> float:
    if config.r_normals is not None:
        return config.r_normals
    return NORMAL_RADIUS_SPACING_FACTOR * median_spacing(cloud, index)


def pipeline_field(
    cloud: PointCloud, r: float, config: TaskConfig, viewpoint=(0.0, 0.0, 0.0)
) -> InadField:
    """Index -> normals -> INAD field at radius r with the config's parameters."""
    index = build_index(cloud)
    r_n = resolve_normal_radius(config, cloud, index)
    normals = estimate_all_normals(
        cloud, index, r_n, viewpoint=viewpoint, min_neighbors=config.min_neighbors
    )
    return compute_inad_field(
        cloud,
        normals,
        index,
        r,
        c=config.outlier_rate,
        rejection_passes=config.rejection_passes,
    )


def pipeline_histogram(
    cloud: PointCloud, r: float, config: TaskConfig, viewpoint=(0.0, 0.0, 0.0)
) -> ShapeHistogram:
    """Shape histogram of a sample surface at radius r."""
    field = pipeline_field(cloud, r, config, viewpoint)
    return build_histogram(
        field, config.k_mu, config.k_sigma, mu_max=config.mu_max, sigma_max=config.sigma_max
    )


def classify_binary(likelihood: LikelihoodField, tau: float = 0.5) -> np.ndarray:
    """Label planar where the planar likelihood is >= tau, curved below.

    Invalid points are labeled UNLABELED. The curved likelihood is defined as
    1 - planar score, so the decision is equivalent to thresholding either side.
    """
    if not 0 < tau < 1:
        raise ValueError("tau must lie strictly between 0 and 1")
    labels = np.full(len(likelihood), UNLABELED, dtype=np.uint8)
    sel = likelihood.valid
    labels[sel & (likelihood.scores >= tau)] = PLANAR
    labels[sel & (likelihood.scores < tau)] = CURVED
    return labels


def classify_scene(
    cloud: PointCloud,
    plane_hist: ShapeHistogram,
    config: TaskConfig,
    viewpoint=(0.0, 0.0, 0.0),
):
    """Full binary classification: returns (labels, planar likelihood field)."""
    field = pipeline_field(cloud, config.r_classify, config, viewpoint)
    planar = back_project(plane_hist, field)
    return classify_binary(planar, config.tau), planar


def detect_edges(
    cloud: PointCloud,
    plane_hist_small_r: ShapeHistogram,
    config: TaskConfig,
    viewpoint=(0.0, 0.0, 0.0),
):
    """High-curvature edge detection at the small radius r_edge.

    The edge likelihood of a point is 1 minus the planar back-projection
    score of the plane histogram (built at r_edge). Returns
    (labels, edge likelihood field); valid non-edge points are labeled planar.
    """
    field = pipeline_field(cloud, config.r_edge, config, viewpoint)
    planar = back_project(plane_hist_small_r, field)
    edge_like = complement(planar)
    labels = np.full(len(cloud), UNLABELED, dtype=np.uint8)
    sel = edge_like.valid
    labels[sel & (edge_like.scores >= config.tau)] = EDGE
    labels[sel & (edge_like.scores < config.tau)] = PLANAR
    return labels, edge_like
