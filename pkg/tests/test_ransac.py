import numpy as np
import pytest

from pointshape.cloud_io import PointCloud
from pointshape.errors import NoModelFound
from pointshape.normals import NormalField
from pointshape.ransac import RansacConfig, extract_instances, ransac_fit
from pointshape.synth import gen_cylinder, gen_plane, merge_parts


def _plane_cloud(seed=0):
    cloud, _, _ = gen_plane(30, 30, 0.005, seed=seed)
    return cloud


def _analytic_normals(cloud):
    return NormalField(normals=cloud.normals, valid=np.ones(len(cloud), bool),
                       radius=0.0, viewpoint=np.zeros(3))


def test_plane_noise_free():
    cloud = _plane_cloud()
    cfg = RansacConfig(model="plane", inlier_threshold=0.001, max_iterations=100,
                       min_inliers=100, seed=0)
    params, inliers = ransac_fit(cloud, None, cfg)
    assert len(inliers) == len(cloud)
    assert abs(abs(params["normal"][2]) - 1.0) < 1e-2  # within 1 degree of +-z


def test_plane_with_uniform_outliers():
    rng = np.random.default_rng(4)
    plane = _plane_cloud()
    n_out = len(plane) // 5
    outliers = rng.uniform([-0.05, -0.05, 0.01], [0.2, 0.2, 0.15], size=(n_out, 3))
    cloud = PointCloud(points=np.vstack([plane.points, outliers]))
    cfg = RansacConfig(model="plane", inlier_threshold=0.002, max_iterations=300,
                       min_inliers=100, seed=1)
    params, inliers = ransac_fit(cloud, None, cfg)
    inlier_set = set(inliers.tolist())
    plane_ids = set(range(len(plane)))
    recovered = len(inlier_set & plane_ids) / len(plane_ids)
    contamination = len(inlier_set - plane_ids) / max(len(inlier_set), 1)
    assert recovered >= 0.99
    assert contamination <= 0.05


def test_cylinder_radius_within_2_percent():
    cloud, _, _ = gen_cylinder(0.05, 0.06, 0.003)
    cfg = RansacConfig(model="cylinder", inlier_threshold=0.001, max_iterations=200,
                       min_inliers=200, seed=0, max_radius=0.2)
    params, inliers = ransac_fit(cloud, _analytic_normals(cloud), cfg)
    assert abs(params["radius"] - 0.05) / 0.05 <= 0.02
    assert len(inliers) >= 0.95 * len(cloud)


def test_inlier_residuals_bounded_by_construction():
    cloud, _, _ = gen_cylinder(0.05, 0.04, 0.004)
    cfg = RansacConfig(model="cylinder", inlier_threshold=0.0015, max_iterations=150,
                       min_inliers=100, seed=3, max_radius=0.2)
    params, inliers = ransac_fit(cloud, _analytic_normals(cloud), cfg)
    rel = cloud.points[inliers] - params["point"]
    axial = rel @ params["axis"]
    radial = np.linalg.norm(rel - np.outer(axial, params["axis"]), axis=1)
    assert np.max(np.abs(radial - params["radius"])) <= cfg.inlier_threshold + 1e-12


def test_two_disjoint_cylinders_extracted():
    a, la, _ = gen_cylinder(0.03, 0.05, 0.003)
    b, lb, _ = gen_cylinder(0.05, 0.05, 0.003)
    cloud, _ = merge_parts([(a, la, None), (b, lb, [0.3, 0, 0])])
    normals = NormalField(normals=np.vstack([a.normals, b.normals]),
                          valid=np.ones(len(cloud), bool), radius=0.0,
                          viewpoint=np.zeros(3))
    cfg = RansacConfig(model="cylinder", inlier_threshold=0.001, max_iterations=300,
                       min_inliers=200, seed=0, max_radius=0.2)
    results = extract_instances(cloud, normals, cfg, 2)
    assert len(results) == 2
    radii = sorted(p["radius"] for p, _ in results)
    assert radii[0] == pytest.approx(0.03, rel=0.05)
    assert radii[1] == pytest.approx(0.05, rel=0.05)
    ids0 = set(results[0][1].tolist())
    ids1 = set(results[1][1].tolist())
    assert not ids0 & ids1  # disjoint inlier sets


def test_requesting_more_instances_than_present():
    cloud, _, _ = gen_cylinder(0.05, 0.05, 0.003)
    cfg = RansacConfig(model="cylinder", inlier_threshold=0.001, max_iterations=200,
                       min_inliers=500, seed=0, max_radius=0.2)
    results = extract_instances(cloud, _analytic_normals(cloud), cfg, 4)
    assert len(results) == 1  # later rounds find no model and stop


def test_no_model_found():
    rng = np.random.default_rng(9)
    cloud = PointCloud(points=rng.uniform(0, 1, size=(200, 3)))
    cfg = RansacConfig(model="plane", inlier_threshold=1e-6, max_iterations=50,
                       min_inliers=150, seed=0)
    with pytest.raises(NoModelFound):
        ransac_fit(cloud, None, cfg)


def test_determinism_under_seed():
    cloud = _plane_cloud()
    cfg = RansacConfig(model="plane", inlier_threshold=0.001, max_iterations=50,
                       min_inliers=50, seed=7)
    p1, i1 = ransac_fit(cloud, None, cfg)
    p2, i2 = ransac_fit(cloud, None, cfg)
    assert np.array_equal(i1, i2)
    np.testing.assert_array_equal(p1["normal"], p2["normal"])


def test_insufficient_points():
    cloud = PointCloud(points=np.array([[0.0, 0, 0], [1, 0, 0]]))
    cfg = RansacConfig(model="plane", inlier_threshold=0.01, max_iterations=10,
                       min_inliers=1, seed=0)
    with pytest.raises(ValueError, match="insufficient"):
        ransac_fit(cloud, None, cfg)
    cfg2 = RansacConfig(model="cylinder", inlier_threshold=0.01, max_iterations=10,
                        min_inliers=1, seed=0)
    with pytest.raises(ValueError, match="requires normals"):
        ransac_fit(cloud, None, cfg2)


def test_config_validation():
    with pytest.raises(ValueError, match="unknown model"):
        RansacConfig(model="sphere")
    with pytest.raises(ValueError):
        RansacConfig(model="plane", inlier_threshold=-1.0)
