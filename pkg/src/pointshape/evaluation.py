"""Metrics (precision/recall/F1/mIoU) and the per-point INAD timing benchmark."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cloud_io import CURVED, PLANAR, UNLABELED, PointCloud
from .inad import inad_pair, inter_normal_angles, reject_outliers_iterated
from .normals import NormalField, estimate_all_normals
from .spatial import SpatialIndex, build_index, median_spacing

_CLASS_NAMES = {0: "planar", 1: "curved", 2: "edge"}


def confusion(pred: np.ndarray, gt: np.ndarray, positive_class: int):
    """(TP, FP, FN, TN) for one class; unlabeled ground-truth points are excluded."""
    pred = np.asarray(pred)
    gt = np.asarray(gt)
    if pred.shape != gt.shape:
        raise ValueError(f"length mismatch: pred {pred.shape} vs gt {gt.shape}")
    sel = gt != UNLABELED
    p = pred[sel] == positive_class
    g = gt[sel] == positive_class
    tp = int(np.sum(p & g))
    fp = int(np.sum(p & ~g))
    fn = int(np.sum(~p & g))
    tn = int(np.sum(~p & ~g))
    return tp, fp, fn, tn


@dataclass
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    iou: float
    tp: int
    fp: int
    fn: int
    tn: int


@dataclass
class MetricsReport:
    per_class: dict
    miou: float
    params: dict = field(default_factory=dict)
    wall_times: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "per_class": {str(k): asdict(v) for k, v in self.per_class.items()},
            "miou": self.miou,
            "params": self.params,
            "wall_times": self.wall_times,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def _safe_div(num, den):
    return num / den if den > 0 else 0.0


def metrics(
    pred: np.ndarray,
    gt: np.ndarray,
    classes: Sequence[int] = (PLANAR, CURVED),
    params: Optional[dict] = None,
) -> MetricsReport:
    """Per-class precision/recall/F1 and the mean IoU over the given classes."""
    per_class = {}
    ious = []
    for cls in classes:
        tp, fp, fn, tn = confusion(pred, gt, cls)
        precision = _safe_div(tp, tp + fp)
        recall = _safe_div(tp, tp + fn)
        f1 = _safe_div(2 * precision * recall, precision + recall)
        iou = _safe_div(tp, tp + fp + fn)
        per_class[cls] = ClassMetrics(
            precision=precision, recall=recall, f1=f1, iou=iou, tp=tp, fp=fp, fn=fn, tn=tn
        )
        ious.append(iou)
    return MetricsReport(
        per_class=per_class,
        miou=float(np.mean(ious)) if ious else 0.0,
        params=dict(params or {}),
    )


def format_metrics_table(report: MetricsReport) -> str:
    """Aligned plain-text table: one row per class plus the mIoU."""
    header = f"{'class':<10} {'precision':>9} {'recall':>9} {'F1':>9} {'IoU':>9}"
    lines = [header, "-" * len(header)]
    for cls, m in report.per_class.items():
        name = _CLASS_NAMES.get(cls, str(cls))
        lines.append(
            f"{name:<10} {m.precision:>9.4f} {m.recall:>9.4f} {m.f1:>9.4f} {m.iou:>9.4f}"
        )
    lines.append(f"{'mIoU':<10} {report.miou:>9.4f}")
    return "\n".join(lines)


@dataclass
class BenchRow:
    k: int
    us_per_point: float
    reps_us: list


def bench_inad(
    cloud: PointCloud,
    k_list: Sequence[int],
    repetitions: int = 5,
    normals: Optional[NormalField] = None,
    outlier_rate: float = 1.0,
    rejection_passes: int = 1,
    threads: int = 1,
) -> list:
    """Mean per-point wall time of the INAD kernel for each neighbor count.

    Times inter_normal_angles + outlier rejection + the (mu, sigma) pair over
    all points using exactly k nearest neighbors. Neighbor lookup and normal
    estimation are excluded from the timed region. A warm-up pass is
    discarded and the median over repetitions is reported. threads > 1 runs
    the same passes on a thread pool (informational throughput only).
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    k_list = [int(k) for k in k_list]
    if not k_list or min(k_list) < 1:
        raise ValueError("k_list must contain positive neighbor counts")
    n = len(cloud)
    max_k = max(k_list)
    if n <= max_k:
        raise ValueError(
            f"insufficient density: cloud of {n} points cannot give every point "
            f"{max_k} neighbors"
        )
    index = build_index(cloud)
    if normals is None:
        if cloud.has_normals:
            normals = NormalField(
                normals=cloud.normals,
                valid=np.ones(n, dtype=bool),
                radius=0.0,
                viewpoint=np.zeros(3),
            )
        else:
            r_n = 3.0 * median_spacing(cloud, index)
            normals = estimate_all_normals(cloud, index, r_n)
    knn = index.k_nearest_all(max_k)

    def one_pass(ids):
        for i in range(n):
            alphas = inter_normal_angles(normals, i, ids[i])
            inliers = reject_outliers_iterated(alphas, outlier_rate, rejection_passes)
            inad_pair(inliers)

    def one_pass_parallel(ids, pool, chunks):
        futures = [
            pool.submit(_chunk_pass, normals, ids, lo, hi, outlier_rate, rejection_passes)
            for lo, hi in chunks
        ]
        for f in futures:
            f.result()

    rows = []
    pool = None
    chunks = None
    if threads > 1:
        pool = ThreadPoolExecutor(max_workers=threads)
        bounds = np.linspace(0, n, threads + 1, dtype=int)
        chunks = list(zip(bounds[:-1], bounds[1:]))
    try:
        for k in k_list:
            ids = np.ascontiguousarray(knn[:, :k])
            reps = []
            for rep in range(repetitions + 1):
                t0 = time.perf_counter()
                if pool is None:
                    one_pass(ids)
                else:
                    one_pass_parallel(ids, pool, chunks)
                elapsed = time.perf_counter() - t0
                if rep > 0:  # discard warm-up
                    reps.append(elapsed / n * 1e6)
            rows.append(BenchRow(k=k, us_per_point=float(np.median(reps)), reps_us=reps))
    finally:
        if pool is not None:
            pool.shutdown()
    return rows


def _chunk_pass(normals, ids, lo, hi, c, passes):
    for i in range(lo, hi):
        alphas = inter_normal_angles(normals, i, ids[i])
        inliers = reject_outliers_iterated(alphas, c, passes)
        inad_pair(inliers)


def format_bench_table(rows) -> str:
    header = f"{'k-NNs':>8} {'us/point':>10}"
    lines = [header, "-" * len(header)]
    for row in rows:
        lines.append(f"{row.k:>8d} {row.us_per_point:>10.2f}")
    return "\n".join(lines)


def loglog_slope(ks: Sequence[float], times: Sequence[float]) -> float:
    """Least-squares slope of log(time) against log(k)."""
    ks = np.asarray(ks, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if len(ks) < 2:
        raise ValueError("need at least two measurements for a slope")
    return float(np.polyfit(np.log(ks), np.log(times), 1)[0])
