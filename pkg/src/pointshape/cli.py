"""Command-line front end.

Subcommands: synth, histogram, backproject, classify, edges, eval, bench,
ransac. Every run writes a ``<first-output>.run.json`` sidecar with the fully
resolved parameters so results can be reproduced. Exit codes: 0 success,
2 usage/config errors, 1 runtime errors.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from pathlib import Path

import numpy as np

from . import cloud_io, evaluation, histogram, inad, ransac, synth
from .cloud_io import CURVED, EDGE, PLANAR, UNLABELED
from .errors import NoModelFound, ParseError, SchemaError
from .normals import estimate_all_normals
from .spatial import build_index, median_spacing
from .tasks import NORMAL_RADIUS_SPACING_FACTOR, classify_binary

LABEL_COLORS = {
    PLANAR: (0, 255, 0),
    CURVED: (0, 0, 255),
    EDGE: (255, 0, 0),
    UNLABELED: (128, 128, 128),
}


def _parse_vec3(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected x,y,z got {text!r}")
    return np.array([float(p) for p in parts])


def _parse_int_list(text):
    return [int(p) for p in text.split(",")]


def _write_sidecar(first_output, command, params):
    payload = {"command": command, "params": params}
    path = str(first_output) + ".run.json"
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def _resolved(args, keys):
    out = {}
    for key in keys:
        value = getattr(args, key)
        if isinstance(value, np.ndarray):
            value = value.tolist()
        elif isinstance(value, Path):
            value = str(value)
        out[key] = value
    return out


def _likelihood_colors(scores, valid):
    colors = np.full((len(scores), 3), 128, dtype=np.int64)
    s = np.clip(scores[valid], 0.0, 1.0)
    colors[valid, 0] = 0
    colors[valid, 1] = np.rint(255 * s).astype(np.int64)  # green = high likelihood
    colors[valid, 2] = np.rint(255 * (1.0 - s)).astype(np.int64)
    return colors


def _label_colors(labels):
    colors = np.empty((len(labels), 3), dtype=np.int64)
    for value, rgb in LABEL_COLORS.items():
        colors[labels == value] = rgb
    return colors


def _compute_field(cloud, r, args):
    index = build_index(cloud)
    r_n = args.normal_radius
    if r_n is None:
        r_n = NORMAL_RADIUS_SPACING_FACTOR * median_spacing(cloud, index)
    normals = estimate_all_normals(
        cloud, index, r_n, viewpoint=args.viewpoint, min_neighbors=args.min_neighbors
    )
    return inad.compute_inad_field(
        cloud, normals, index, r,
        c=args.outlier_rate, rejection_passes=args.rejection_passes,
    )


def _write_scores_csv(path, like):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("point_id,score,valid\n")
        for i in range(len(like)):
            fh.write(f"{i},{like.scores[i]:.9g},{int(like.valid[i])}\n")


def cmd_synth(args):
    spec = synth.load_scene_spec(args.spec)
    if args.seed is not None:
        spec["seed"] = args.seed
    cloud, labels, viewpoint = synth.gen_scene(spec)
    if args.format == "xyz" or (args.format is None and str(args.out_cloud).endswith(".xyz")):
        cloud = cloud_io.PointCloud(points=cloud.points)  # xyz cannot store normals
    cloud_io.save_cloud(cloud, args.out_cloud, format=args.format)
    outputs = [str(args.out_cloud)]
    if args.out_labels:
        cloud_io.save_labels(labels, args.out_labels)
        outputs.append(str(args.out_labels))
    params = _resolved(args, ["spec", "out_cloud", "out_labels", "format", "seed"])
    params["viewpoint"] = viewpoint.tolist()
    params["points"] = len(cloud)
    _write_sidecar(args.out_cloud, "synth", params)
    print(f"wrote {len(cloud)} points to {args.out_cloud}", file=sys.stderr)
    return 0


def cmd_histogram(args):
    cloud = cloud_io.load_cloud(args.cloud)
    field = _compute_field(cloud, args.radius, args)
    hist = histogram.build_histogram(
        field, args.bins_mu, args.bins_sigma, mu_max=args.mu_max, sigma_max=args.sigma_max
    )
    histogram.save_histogram(hist, args.out)
    _write_sidecar(
        args.out,
        "histogram",
        _resolved(args, [
            "cloud", "radius", "outlier_rate", "rejection_passes", "bins_mu",
            "bins_sigma", "mu_max", "sigma_max", "normal_radius", "min_neighbors",
            "viewpoint", "out",
        ]),
    )
    peak = np.unravel_index(np.argmax(hist.bins), hist.bins.shape)
    print(f"histogram over {hist.sample_count} points, peak bin {tuple(int(v) for v in peak)}",
          file=sys.stderr)
    return 0


def cmd_backproject(args):
    hist = histogram.load_histogram(args.histogram)
    cloud = cloud_io.load_cloud(args.cloud)
    r = args.radius if args.radius is not None else hist.source_r
    field = _compute_field(cloud, r, args)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        like = histogram.back_project(hist, field)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    _write_scores_csv(args.out_csv, like)
    outputs = [str(args.out_csv)]
    if args.out_ply:
        cloud_io.save_colored_ply(cloud.points, _likelihood_colors(like.scores, like.valid),
                                  args.out_ply)
        outputs.append(str(args.out_ply))
    params = _resolved(args, [
        "histogram", "cloud", "radius", "outlier_rate", "rejection_passes",
        "normal_radius", "min_neighbors", "viewpoint", "out_csv", "out_ply",
    ])
    params["radius_used"] = r
    _write_sidecar(args.out_csv, "backproject", params)
    return 0


def _classify_like(args, label_high, label_low, command):
    """Shared body of classify (planar/curved) and edges (planar/edge)."""
    hist = histogram.load_histogram(args.histogram)
    cloud = cloud_io.load_cloud(args.cloud)
    r = args.radius if args.radius is not None else hist.source_r
    field = _compute_field(cloud, r, args)
    like = histogram.back_project(hist, field)
    if command == "classify":
        labels = classify_binary(like, args.threshold)
        out_scores = like
    else:
        edge_like = histogram.complement(like)
        labels = np.full(len(cloud), UNLABELED, dtype=np.uint8)
        labels[edge_like.valid & (edge_like.scores >= args.threshold)] = EDGE
        labels[edge_like.valid & (edge_like.scores < args.threshold)] = PLANAR
        out_scores = edge_like
    cloud_io.save_labels(labels, args.out_labels)
    if args.out_csv:
        _write_scores_csv(args.out_csv, out_scores)
    if args.out_ply:
        cloud_io.save_colored_ply(cloud.points, _label_colors(labels), args.out_ply)
    params = _resolved(args, [
        "histogram", "cloud", "radius", "threshold", "outlier_rate",
        "rejection_passes", "normal_radius", "min_neighbors", "viewpoint",
        "out_labels", "out_csv", "out_ply", "gt",
    ])
    params["radius_used"] = r
    _write_sidecar(args.out_labels, command, params)
    if args.gt:
        gt = cloud_io.load_labels(args.gt)
        classes = (PLANAR, CURVED) if command == "classify" else (PLANAR, EDGE)
        report = evaluation.metrics(labels, gt, classes=classes, params=params)
        print(evaluation.format_metrics_table(report))
        if args.out_report:
            with open(args.out_report, "w", encoding="ascii", newline="\n") as fh:
                fh.write(report.to_json() + "\n")
    return 0


def cmd_classify(args):
    return _classify_like(args, PLANAR, CURVED, "classify")


def cmd_edges(args):
    return _classify_like(args, PLANAR, EDGE, "edges")


def cmd_eval(args):
    pred = cloud_io.load_labels(args.pred)
    gt = cloud_io.load_labels(args.gt)
    report = evaluation.metrics(pred, gt, classes=tuple(args.classes))
    print(evaluation.format_metrics_table(report))
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write(report.to_json() + "\n")
        _write_sidecar(args.out, "eval", _resolved(args, ["pred", "gt", "classes", "out"]))
    return 0


def cmd_bench(args):
    cloud = cloud_io.load_cloud(args.cloud)
    rows = evaluation.bench_inad(
        cloud,
        args.k_list,
        repetitions=args.repetitions,
        outlier_rate=args.outlier_rate,
        rejection_passes=args.rejection_passes,
        threads=args.threads,
    )
    print(evaluation.format_bench_table(rows))
    if args.out:
        with open(args.out, "w", encoding="ascii", newline="\n") as fh:
            fh.write("k,us_per_point\n")
            for row in rows:
                fh.write(f"{row.k},{row.us_per_point:.3f}\n")
        _write_sidecar(args.out, "bench", _resolved(args, [
            "cloud", "k_list", "repetitions", "outlier_rate", "rejection_passes",
            "threads", "out",
        ]))
    return 0


def cmd_ransac(args):
    cloud = cloud_io.load_cloud(args.cloud)
    normals = None
    if args.model == "cylinder":
        index = build_index(cloud)
        r_n = args.normal_radius
        if r_n is None:
            r_n = NORMAL_RADIUS_SPACING_FACTOR * median_spacing(cloud, index)
        normals = estimate_all_normals(cloud, index, r_n, viewpoint=args.viewpoint)
    config = ransac.RansacConfig(
        model=args.model,
        inlier_threshold=args.inlier_threshold,
        max_iterations=args.max_iterations,
        min_inliers=args.min_inliers,
        seed=args.seed if args.seed is not None else 0,
        max_radius=args.max_radius,
    )
    results = ransac.extract_instances(cloud, normals, config, args.instances)
    inlier_label = PLANAR if args.model == "plane" else CURVED
    other_label = CURVED if args.model == "plane" else PLANAR
    labels = np.full(len(cloud), other_label, dtype=np.uint8)
    for _, ids in results:
        labels[ids] = inlier_label
    cloud_io.save_labels(labels, args.out_labels)
    params = _resolved(args, [
        "cloud", "model", "inlier_threshold", "max_iterations", "min_inliers",
        "instances", "seed", "max_radius", "normal_radius", "out_labels",
    ])
    params["instances_found"] = len(results)
    params["models"] = [
        {k: (v.tolist() if isinstance(v, np.ndarray) else v) for k, v in p.items()}
        for p, _ in results
    ]
    _write_sidecar(args.out_labels, "ransac", params)
    print(f"extracted {len(results)} instance(s)", file=sys.stderr)
    return 0


def _add_field_options(p):
    p.add_argument("--outlier-rate", type=float, default=1.0,
                   help="sigma multiple for angle outlier rejection")
    p.add_argument("--rejection-passes", type=int, default=2,
                   help="outlier rejection passes (1 = single pass)")
    p.add_argument("--normal-radius", type=float, default=None,
                   help="normal estimation radius (default: 1.5 x median spacing)")
    p.add_argument("--min-neighbors", type=int, default=5)
    p.add_argument("--viewpoint", type=_parse_vec3, default=np.zeros(3),
                   help="viewpoint x,y,z for normal orientation")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="pointshape",
        description="Shape histograms and back-projection for point cloud classification "
                    "and edge detection",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic scene from a JSON spec")
    p.add_argument("--spec", required=True)
    p.add_argument("--out-cloud", required=True)
    p.add_argument("--out-labels", default=None)
    p.add_argument("--format", choices=["pcd-ascii", "ply-ascii", "xyz"], default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("histogram", help="build a shape histogram from a sample cloud")
    p.add_argument("--cloud", required=True)
    p.add_argument("--radius", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--bins-mu", type=int, default=10)
    p.add_argument("--bins-sigma", type=int, default=10)
    p.add_argument("--mu-max", type=float, default=histogram.DEFAULT_MU_MAX)
    p.add_argument("--sigma-max", type=float, default=histogram.DEFAULT_SIGMA_MAX)
    _add_field_options(p)
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("backproject", help="back-project a histogram onto a cloud")
    p.add_argument("--histogram", required=True)
    p.add_argument("--cloud", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-ply", default=None)
    p.add_argument("--radius", type=float, default=None,
                   help="field radius (default: the histogram's source radius)")
    _add_field_options(p)
    p.set_defaults(func=cmd_backproject)

    for name, help_text in (
        ("classify", "binary planar/curved classification"),
        ("edges", "high-curvature edge detection"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--histogram", required=True, help="planar-sample histogram file")
        p.add_argument("--cloud", required=True)
        p.add_argument("--out-labels", required=True)
        p.add_argument("--out-csv", default=None)
        p.add_argument("--out-ply", default=None)
        p.add_argument("--gt", default=None, help="ground-truth labels for metrics")
        p.add_argument("--out-report", default=None)
        p.add_argument("--threshold", type=float, default=0.5)
        p.add_argument("--radius", type=float, default=None)
        _add_field_options(p)
        p.set_defaults(func=cmd_classify if name == "classify" else cmd_edges)

    p = sub.add_parser("eval", help="compare predicted labels against ground truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--classes", type=_parse_int_list, default=[PLANAR, CURVED])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", help="per-point INAD timing benchmark")
    p.add_argument("--cloud", required=True)
    p.add_argument("--k-list", type=_parse_int_list, default=[10, 100, 500])
    p.add_argument("--repetitions", type=int, default=5)
    p.add_argument("--outlier-rate", type=float, default=1.0)
    p.add_argument("--rejection-passes", type=int, default=1)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("ransac", help="RANSAC plane/cylinder extraction baseline")
    p.add_argument("--cloud", required=True)
    p.add_argument("--model", choices=["plane", "cylinder"], required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--inlier-threshold", type=float, default=0.002)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--min-inliers", type=int, default=50)
    p.add_argument("--instances", type=int, default=1)
    p.add_argument("--max-radius", type=float, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--normal-radius", type=float, default=None)
    p.add_argument("--viewpoint", type=_parse_vec3, default=np.zeros(3))
    p.set_defaults(func=cmd_ransac)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ParseError, SchemaError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NoModelFound, OSError, RuntimeError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
