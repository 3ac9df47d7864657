import numpy as np
import pytest

from pointshape.cloud_io import CURVED, PLANAR, UNLABELED
from pointshape.evaluation import (
    bench_inad,
    confusion,
    format_bench_table,
    format_metrics_table,
    loglog_slope,
    metrics,
)
from pointshape.synth import gen_cylinder


def test_confusion_perfect():
    gt = np.array([0, 0, 1, 1], dtype=np.uint8)
    assert confusion(gt, gt, 0) == (2, 0, 0, 2)


def test_confusion_all_positive_vs_all_negative():
    pred = np.zeros(10, dtype=np.uint8)
    gt = np.ones(10, dtype=np.uint8)
    tp, fp, fn, tn = confusion(pred, gt, 0)
    assert (tp, fp, fn, tn) == (0, 10, 0, 0)


def test_confusion_matches_naive_tally():
    rng = np.random.default_rng(0)
    for _ in range(25):
        pred = rng.integers(0, 3, size=100).astype(np.uint8)
        gt = rng.integers(0, 3, size=100).astype(np.uint8)
        gt[rng.random(100) < 0.1] = UNLABELED
        for cls in (0, 1, 2):
            tp = fp = fn = tn = 0
            for p, g in zip(pred, gt):
                if g == UNLABELED:
                    continue
                if p == cls and g == cls:
                    tp += 1
                elif p == cls:
                    fp += 1
                elif g == cls:
                    fn += 1
                else:
                    tn += 1
            assert confusion(pred, gt, cls) == (tp, fp, fn, tn)


def test_confusion_length_mismatch():
    with pytest.raises(ValueError, match="length mismatch"):
        confusion(np.zeros(3, np.uint8), np.zeros(4, np.uint8), 0)


def test_metrics_perfect():
    gt = np.array([0, 1, 0, 1], dtype=np.uint8)
    rep = metrics(gt, gt)
    for m in rep.per_class.values():
        assert m.precision == m.recall == m.f1 == m.iou == 1.0
    assert rep.miou == 1.0


def test_metrics_formula_example():
    # TP=50, FP=50, FN=0 for the planar class
    gt = np.concatenate([np.zeros(50), np.ones(50)]).astype(np.uint8)
    pred = np.zeros(100, dtype=np.uint8)
    rep = metrics(pred, gt, classes=(PLANAR,))
    m = rep.per_class[PLANAR]
    assert m.precision == pytest.approx(0.5)
    assert m.recall == pytest.approx(1.0)
    assert m.f1 == pytest.approx(2 / 3, abs=1e-4)


def test_miou_is_mean_of_class_ious():
    # class 0: TP=80, FP=10, FN=10 -> IoU 0.8; class 1: TP=60, FP=20, FN=20 -> IoU 0.6
    # (class-2 confusions pad class 1's errors without touching class 0)
    gt = np.concatenate([np.zeros(80), np.ones(10), np.zeros(10),
                         np.ones(60), np.ones(10), np.full(10, 2)]).astype(np.uint8)
    pred = np.concatenate([np.zeros(80), np.zeros(10), np.ones(10),
                           np.ones(60), np.full(10, 2), np.ones(10)]).astype(np.uint8)
    rep = metrics(pred, gt, classes=(0, 1))
    assert rep.per_class[0].iou == pytest.approx(0.8)
    assert rep.per_class[1].iou == pytest.approx(0.6)
    assert rep.miou == pytest.approx(0.7)


def test_zero_denominators_give_zero():
    gt = np.ones(4, dtype=np.uint8)
    pred = np.ones(4, dtype=np.uint8)
    rep = metrics(pred, gt, classes=(PLANAR, CURVED))
    m = rep.per_class[PLANAR]
    assert m.precision == m.recall == m.f1 == m.iou == 0.0


def test_report_serialization_and_table():
    gt = np.array([0, 1, 0, 1], dtype=np.uint8)
    rep = metrics(gt, gt, params={"r": 0.03})
    text = format_metrics_table(rep)
    assert "planar" in text and "mIoU" in text
    assert '"miou": 1.0' in rep.to_json()


def test_bench_structure_and_bounds():
    cloud, _, _ = gen_cylinder(0.05, 0.02, 0.004)
    rows = bench_inad(cloud, [5, 20], repetitions=2)
    assert [r.k for r in rows] == [5, 20]
    for row in rows:
        assert row.us_per_point > 0
        assert len(row.reps_us) == 2
    table = format_bench_table(rows)
    assert "us/point" in table


def test_bench_insufficient_density():
    cloud, _, _ = gen_cylinder(0.05, 0.01, 0.01)
    with pytest.raises(ValueError, match="insufficient density"):
        bench_inad(cloud, [10 ** 6], repetitions=1)


def test_bench_parallel_mode_runs():
    cloud, _, _ = gen_cylinder(0.05, 0.02, 0.005)
    rows = bench_inad(cloud, [5], repetitions=1, threads=2)
    assert rows[0].us_per_point > 0


def test_loglog_slope():
    ks = [10, 100, 500]
    assert loglog_slope(ks, [10.0, 100.0, 500.0]) == pytest.approx(1.0)
    assert loglog_slope(ks, [3.0, 3.0, 3.0]) == pytest.approx(0.0, abs=1e-12)
