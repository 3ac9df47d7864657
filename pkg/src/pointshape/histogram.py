"""2-D shape histograms over (mu, sigma) angle statistics and their back-projection.

A histogram accumulates each valid field point into a k_mu x k_sigma grid
(bin = floor(value * k / range), top clamped) and is normalized by its
maximum bin, so the peak is exactly 1. Back-projection assigns every test
point the normalized value of its bin, a shape-similarity likelihood in [0, 1].
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import ParseError, SchemaError
from .inad import InadField

_FORMAT_VERSION = 1
DEFAULT_MU_MAX = 90.0
DEFAULT_SIGMA_MAX = 45.0


def bin_id(value: float, range_max: float, k: int) -> int:
    """floor(value * k / range_max), clamped into [0, k-1]."""
    if value < 0:
        raise ValueError(f"negative value {value}")
    if k < 1:
        raise ValueError(f"bin count must be >= 1, got {k}")
    if range_max <= 0:
        raise ValueError(f"range_max must be positive, got {range_max}")
    return min(int(math.floor(value * k / range_max)), k - 1)


def _bin_ids(values: np.ndarray, range_max: float, k: int) -> np.ndarray:
    if np.any(values < 0):
        raise ValueError("negative value in bin input")
    ids = np.floor(values * (k / range_max)).astype(np.intp)
    return np.minimum(ids, k - 1)


@dataclass
class ShapeHistogram:
    """Max-normalized 2-D frequency grid with its axis ranges and provenance."""

    k_mu: int
    k_sigma: int
    mu_max: float
    sigma_max: float
    bins: np.ndarray
    counts: np.ndarray
    sample_count: int
    source_r: float

    def __post_init__(self):
        self.bins = np.asarray(self.bins, dtype=np.float64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.k_mu < 1 or self.k_sigma < 1:
            raise ValueError("bin counts must be >= 1")
        if self.bins.shape != (self.k_mu, self.k_sigma):
            raise ValueError(f"bins shape {self.bins.shape} != ({self.k_mu}, {self.k_sigma})")
        if self.counts.shape != self.bins.shape:
            raise ValueError("counts shape does not match bins")
        if np.any(self.bins < 0) or np.any(self.bins > 1):
            raise ValueError("bin values must lie in [0, 1]")
        if self.sample_count > 0 and not math.isclose(float(self.bins.max()), 1.0):
            raise ValueError("max-normalization violated: peak bin != 1")


@dataclass
class LikelihoodField:
    """Per-point back-projection scores in [0, 1] with validity flags."""

    scores: np.ndarray
    valid: np.ndarray
    radius: float
    histogram: Optional[ShapeHistogram] = dc_field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.scores)


def build_histogram(
    field: InadField,
    k_mu: int = 10,
    k_sigma: int = 10,
    mu_max: float = DEFAULT_MU_MAX,
    sigma_max: float = DEFAULT_SIGMA_MAX,
) -> ShapeHistogram:
    """Accumulate the field's valid (mu, sigma) pairs and max-normalize."""
    if k_mu < 1 or k_sigma < 1:
        raise ValueError("bin counts must be >= 1")
    if mu_max <= 0 or sigma_max <= 0:
        raise ValueError("axis ranges must be positive")
    sel = field.valid
    n_valid = int(sel.sum())
    if n_valid == 0:
        raise ValueError("no valid points in field")
    bmu = _bin_ids(field.mu[sel], mu_max, k_mu)
    bsig = _bin_ids(field.sigma[sel], sigma_max, k_sigma)
    counts = np.zeros((k_mu, k_sigma), dtype=np.int64)
    np.add.at(counts, (bmu, bsig), 1)
    bins = counts / counts.max()
    return ShapeHistogram(
        k_mu=k_mu,
        k_sigma=k_sigma,
        mu_max=mu_max,
        sigma_max=sigma_max,
        bins=bins,
        counts=counts,
        sample_count=n_valid,
        source_r=field.radius,
    )


def back_project(h: ShapeHistogram, field: InadField) -> LikelihoodField:
    """Score every valid field point with the histogram value of its bin."""
    if not math.isclose(field.radius, h.source_r, rel_tol=1e-9, abs_tol=0.0):
        warnings.warn(
            f"back-projecting a histogram built at r={h.source_r} onto a field "
            f"computed at r={field.radius}",
            stacklevel=2,
        )
    scores = np.zeros(len(field))
    sel = field.valid
    if sel.any():
        bmu = _bin_ids(field.mu[sel], h.mu_max, h.k_mu)
        bsig = _bin_ids(field.sigma[sel], h.sigma_max, h.k_sigma)
        scores[sel] = h.bins[bmu, bsig]
    return LikelihoodField(scores=scores, valid=sel.copy(), radius=field.radius, histogram=h)


def complement(likelihood: LikelihoodField) -> LikelihoodField:
    """1 - score at every valid point (the opposing-class likelihood)."""
    scores = np.where(likelihood.valid, 1.0 - likelihood.scores, 0.0)
    return LikelihoodField(
        scores=scores,
        valid=likelihood.valid.copy(),
        radius=likelihood.radius,
        histogram=likelihood.histogram,
    )


def serialize(h: ShapeHistogram) -> str:
    doc = {
        "version": _FORMAT_VERSION,
        "k_mu": h.k_mu,
        "k_sigma": h.k_sigma,
        "mu_range": [0.0, h.mu_max],
        "sigma_range": [0.0, h.sigma_max],
        "source_r": h.source_r,
        "sample_count": h.sample_count,
        "bins": h.bins.ravel().tolist(),
        "counts": h.counts.ravel().tolist(),
    }
    return json.dumps(doc, indent=1)


_REQUIRED_KEYS = (
    "version",
    "k_mu",
    "k_sigma",
    "mu_range",
    "sigma_range",
    "source_r",
    "sample_count",
    "bins",
)


def deserialize(text: str) -> ShapeHistogram:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid histogram document: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaError("histogram document must be a JSON object")
    for key in _REQUIRED_KEYS:
        if key not in doc:
            raise SchemaError(f"histogram document missing field {key!r}")
    if doc["version"] != _FORMAT_VERSION:
        raise SchemaError(f"unsupported histogram version {doc['version']!r}")
    k_mu, k_sigma = int(doc["k_mu"]), int(doc["k_sigma"])
    bins = np.asarray(doc["bins"], dtype=np.float64)
    if bins.size != k_mu * k_sigma:
        raise SchemaError(f"bins length {bins.size} != k_mu*k_sigma = {k_mu * k_sigma}")
    counts_raw = doc.get("counts")
    if counts_raw is not None:
        counts = np.asarray(counts_raw, dtype=np.int64).reshape(k_mu, k_sigma)
    else:
        counts = np.zeros((k_mu, k_sigma), dtype=np.int64)
    return ShapeHistogram(
        k_mu=k_mu,
        k_sigma=k_sigma,
        mu_max=float(doc["mu_range"][1]),
        sigma_max=float(doc["sigma_range"][1]),
        bins=bins.reshape(k_mu, k_sigma),
        counts=counts,
        sample_count=int(doc["sample_count"]),
        source_r=float(doc["source_r"]),
    )


def save_histogram(h: ShapeHistogram, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(serialize(h) + "\n")


def load_histogram(path) -> ShapeHistogram:
    with open(path, "r", encoding="ascii") as fh:
        return deserialize(fh.read())
