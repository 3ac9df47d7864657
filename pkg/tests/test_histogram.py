import numpy as np
import pytest

from pointshape.cloud_io import PointCloud
from pointshape.errors import ParseError, SchemaError
from pointshape.histogram import (
    ShapeHistogram,
    back_project,
    bin_id,
    build_histogram,
    complement,
    deserialize,
    serialize,
)
from pointshape.inad import InadField, compute_inad_field
from pointshape.normals import NormalField, estimate_all_normals
from pointshape.spatial import build_index
from pointshape.synth import gen_cylinder, gen_plane


def _make_field(mu, sigma=None, valid=None, radius=0.01):
    mu = np.asarray(mu, dtype=float)
    sigma = np.zeros_like(mu) if sigma is None else np.asarray(sigma, dtype=float)
    valid = np.ones(len(mu), bool) if valid is None else np.asarray(valid)
    return InadField(mu=mu, sigma=sigma, inlier_count=np.ones(len(mu), dtype=np.intp),
                     valid=valid, radius=radius, outlier_rate=1.0)


def test_bin_id_examples():
    assert bin_id(0.0, 90.0, 10) == 0
    assert bin_id(45.0, 90.0, 10) == 5
    assert bin_id(90.0, 90.0, 10) == 9  # boundary clamps into the top bin
    assert bin_id(1000.0, 90.0, 10) == 9
    with pytest.raises(ValueError):
        bin_id(-0.1, 90.0, 10)
    with pytest.raises(ValueError):
        bin_id(1.0, 90.0, 0)


def test_build_single_bin_plane_field():
    h = build_histogram(_make_field(np.zeros(40)))
    assert h.bins[0, 0] == 1.0
    assert h.counts[0, 0] == 40
    assert h.bins.sum() == 1.0
    assert h.sample_count == 40


def test_build_two_bins_ratio():
    mu = np.concatenate([np.full(30, 5.0), np.full(10, 50.0)])
    h = build_histogram(_make_field(mu))
    assert h.bins[0, 0] == 1.0
    assert h.bins[5, 0] == pytest.approx(1.0 / 3.0)
    assert h.counts.sum() == 40


def test_build_no_valid_points():
    with pytest.raises(ValueError, match="no valid"):
        build_histogram(_make_field([1.0, 2.0], valid=[False, False]))


def test_normalization_invariants():
    rng = np.random.default_rng(0)
    h = build_histogram(_make_field(rng.uniform(0, 90, 500), rng.uniform(0, 45, 500)))
    assert h.bins.max() == 1.0
    assert h.bins.min() >= 0.0


def test_bin_count_sensitivity_conserves_counts():
    rng = np.random.default_rng(1)
    field = _make_field(rng.uniform(0, 90, 300), rng.uniform(0, 45, 300))
    h1 = build_histogram(field, 10, 10)
    h2 = build_histogram(field, 20, 20)
    assert h1.counts.sum() == h2.counts.sum() == 300


def test_back_project_plane_on_plane():
    field = _make_field(np.zeros(25))
    h = build_histogram(field)
    like = back_project(h, field)
    np.testing.assert_array_equal(like.scores, 1.0)


def test_back_project_unpopulated_bins_score_zero():
    h = build_histogram(_make_field(np.zeros(25)))
    curved = _make_field(np.full(10, 40.0), radius=0.01)
    like = back_project(h, curved)
    np.testing.assert_array_equal(like.scores, 0.0)


def test_back_project_matches_naive_lookup_oracle():
    cloud, _, vp = gen_cylinder(0.05, 0.03, 0.003)
    idx = build_index(cloud)
    nf = estimate_all_normals(cloud, idx, 0.007, viewpoint=vp)
    field = compute_inad_field(cloud, nf, idx, 0.012)
    h = build_histogram(field)
    like = back_project(h, field)
    assert like.scores[field.valid].mean() >= 0.5
    # naive per-point re-lookup
    for i in range(0, len(cloud), 97):
        if not field.valid[i]:
            assert like.scores[i] == 0.0
            continue
        bm = min(int(field.mu[i] * h.k_mu / h.mu_max), h.k_mu - 1)
        bs = min(int(field.sigma[i] * h.k_sigma / h.sigma_max), h.k_sigma - 1)
        assert like.scores[i] == h.bins[bm, bs]


def test_back_project_self_consistency():
    cloud, _, vp = gen_cylinder(0.05, 0.03, 0.003)
    idx = build_index(cloud)
    nf = estimate_all_normals(cloud, idx, 0.007, viewpoint=vp)
    field = compute_inad_field(cloud, nf, idx, 0.012)
    like = back_project(build_histogram(field), field)
    assert (like.scores[field.valid] > 0).all()


def test_back_project_warns_on_radius_mismatch():
    h = build_histogram(_make_field(np.zeros(5), radius=0.01))
    other = _make_field(np.zeros(5), radius=0.02)
    with pytest.warns(UserWarning, match="r=0.01"):
        back_project(h, other)


def test_back_project_invalid_points_stay_invalid():
    field = _make_field([0.0, 0.0, 40.0], valid=[True, False, True])
    like = back_project(build_histogram(field), field)
    assert not like.valid[1]
    assert like.scores[1] == 0.0


def test_complement_sums_to_one_exactly():
    rng = np.random.default_rng(3)
    field = _make_field(rng.uniform(0, 90, 400), rng.uniform(0, 45, 400))
    like = back_project(build_histogram(field), field)
    comp = complement(like)
    total = like.scores[like.valid] + comp.scores[comp.valid]
    assert (total == 1.0).all()


def test_serialize_roundtrip_bitwise():
    rng = np.random.default_rng(2)
    h = build_histogram(_make_field(rng.uniform(0, 90, 200), rng.uniform(0, 45, 200)))
    back = deserialize(serialize(h))
    assert np.array_equal(back.bins, h.bins)
    assert np.array_equal(back.counts, h.counts)
    assert back.sample_count == h.sample_count
    assert back.source_r == h.source_r
    assert (back.mu_max, back.sigma_max) == (h.mu_max, h.sigma_max)


def test_deserialize_missing_field():
    h = build_histogram(_make_field(np.zeros(5)))
    import json

    doc = json.loads(serialize(h))
    del doc["k_sigma"]
    with pytest.raises(SchemaError, match="k_sigma"):
        deserialize(json.dumps(doc))


def test_deserialize_rejects_invariant_violation():
    h = build_histogram(_make_field(np.zeros(5)))
    import json

    doc = json.loads(serialize(h))
    doc["bins"][0] = 1.2
    with pytest.raises(ValueError, match="\\[0, 1\\]"):
        deserialize(json.dumps(doc))


def test_deserialize_garbage():
    with pytest.raises(ParseError):
        deserialize("{not json")


def test_histograms_invariant_under_rigid_motion():
    cloud, _, vp = gen_cylinder(0.05, 0.03, 0.004)
    idx = build_index(cloud)
    nf = estimate_all_normals(cloud, idx, 0.0093, viewpoint=vp)
    f0 = compute_inad_field(cloud, nf, idx, 0.0171)
    h0 = build_histogram(f0)
    rng = np.random.default_rng(8)
    for _ in range(3):
        a = rng.normal(size=(3, 3))
        q, _ = np.linalg.qr(a)
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        t = rng.uniform(-1, 1, 3)
        moved = PointCloud(points=cloud.points @ q.T + t)
        idx2 = build_index(moved)
        nf2 = estimate_all_normals(moved, idx2, 0.0093, viewpoint=q @ vp + t)
        h2 = build_histogram(compute_inad_field(moved, nf2, idx2, 0.0171))
        assert np.array_equal(h0.counts, h2.counts)


def test_shape_histogram_validation():
    with pytest.raises(ValueError, match="max-normalization"):
        ShapeHistogram(k_mu=2, k_sigma=2, mu_max=90, sigma_max=45,
                       bins=np.full((2, 2), 0.5), counts=np.ones((2, 2), dtype=int),
                       sample_count=4, source_r=0.01)
