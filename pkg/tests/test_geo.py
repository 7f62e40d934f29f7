import math

import numpy as np
import pytest

from availcast.geo import (
    EARTH_RADIUS_KM,
    ClusterModel,
    GeoPoint,
    GeoValidationError,
    assign_cluster,
    assign_clusters,
    gap_statistic,
    haversine_km,
    kmeans_haversine,
    within_dispersion,
)
from conftest import adjusted_rand_index


class TestHaversine:
    def test_identical_points(self):
        assert haversine_km(GeoPoint(0, 0), GeoPoint(0, 0)) == 0.0

    def test_quarter_circle(self):
        # a = sin^2(45 deg) = 0.5, arc = pi/2
        d = haversine_km(GeoPoint(0, 0), GeoPoint(0, 90))
        assert d == pytest.approx(EARTH_RADIUS_KM * math.pi / 2, rel=1e-12)

    def test_antipodal(self):
        d = haversine_km(GeoPoint(0, 0), GeoPoint(0, 180))
        assert d == pytest.approx(EARTH_RADIUS_KM * math.pi, rel=1e-12)

    def test_symmetry_identity_bound_random(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            a = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            b = GeoPoint(rng.uniform(-90, 90), rng.uniform(-180, 180))
            dab = haversine_km(a, b)
            assert dab == haversine_km(b, a)
            assert haversine_km(a, a) == 0.0
            assert 0.0 <= dab <= math.pi * EARTH_RADIUS_KM

    def test_rejects_bad_coordinates(self):
        with pytest.raises(GeoValidationError):
            GeoPoint(91.0, 0.0)
        with pytest.raises(GeoValidationError):
            GeoPoint(0.0, -180.5)
        with pytest.raises(GeoValidationError):
            GeoPoint(float("nan"), 0.0)

    def test_rejects_bad_radius(self):
        with pytest.raises(ValueError):
            haversine_km(GeoPoint(0, 0), GeoPoint(1, 1), radius_km=0.0)


class TestKMeans:
    def test_recovers_blobs(self, blob_data):
        points, labels = blob_data
        model = kmeans_haversine(points, 3, seed=1)
        assigned = assign_clusters(model, points)
        assert adjusted_rand_index(labels, assigned) == 1.0

    def test_cost_non_increasing(self, blob_data):
        points, _ = blob_data
        model = kmeans_haversine(points, 3, seed=1)
        costs = model.cost_history
        assert len(costs) >= 1
        assert all(costs[i + 1] <= costs[i] + 1e-9 for i in range(len(costs) - 1))

    def test_k_one_cost_is_total_dispersion(self, blob_data):
        points, _ = blob_data
        model = kmeans_haversine(points, 1, seed=0)
        d = np.array(
            [haversine_km(GeoPoint(*p), model.centroids[0]) for p in points]
        )
        assert model.cost_history[-1] == pytest.approx(float((d**2).sum()), rel=1e-9)

    def test_k_equals_n_zero_cost(self):
        rng = np.random.default_rng(0)
        points = rng.uniform(-1, 1, size=(8, 2))
        model = kmeans_haversine(points, 8, seed=0)
        assert model.cost_history[-1] == pytest.approx(0.0, abs=1e-12)
        assert model.k == 8

    def test_k_larger_than_n(self):
        with pytest.raises(ValueError):
            kmeans_haversine(np.zeros((2, 2)), 3, seed=0)

    def test_empty_input(self):
        with pytest.raises(ValueError):
            kmeans_haversine(np.zeros((0, 2)), 1, seed=0)

    def test_deterministic(self, blob_data):
        points, _ = blob_data
        a = kmeans_haversine(points, 3, seed=7)
        b = kmeans_haversine(points, 3, seed=7)
        assert a.centroids == b.centroids


class TestAssign:
    def test_point_on_centroid(self):
        model = ClusterModel([GeoPoint(0, 0), GeoPoint(10, 10), GeoPoint(20, 20)])
        assert assign_cluster(model, GeoPoint(20, 20)) == 2

    def test_tie_prefers_smallest_index(self):
        # both centroids sit exactly 10 degrees of arc from the origin
        model = ClusterModel([GeoPoint(0, 10), GeoPoint(10, 0)])
        assert assign_cluster(model, GeoPoint(0, 0)) == 0

    def test_matches_exhaustive_scan(self, blob_data):
        points, _ = blob_data
        model = kmeans_haversine(points, 3, seed=1)
        rng = np.random.default_rng(4)
        for _ in range(50):
            p = GeoPoint(rng.uniform(35, 50), rng.uniform(-85, -70))
            dists = [haversine_km(p, c) for c in model.centroids]
            assert assign_cluster(model, p) == int(np.argmin(dists))

    def test_blob_members_map_to_their_cluster(self, blob_data):
        points, labels = blob_data
        model = kmeans_haversine(points, 3, seed=1)
        assigned = assign_clusters(model, points)
        # each generated blob lands in exactly one discovered cluster
        for blob in range(3):
            assert len(set(assigned[labels == blob])) == 1


class TestWithinDispersion:
    def test_two_point_cluster(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0]])
        model = ClusterModel([GeoPoint(0, 0.5)])
        d = haversine_km(GeoPoint(0, 0), GeoPoint(0, 1))
        w = within_dispersion(pts, [0, 0], model)
        assert w == pytest.approx(d**2 / 2, rel=1e-12)

    def test_singletons_are_zero(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
        model = ClusterModel([GeoPoint(0, 0), GeoPoint(0, 1), GeoPoint(0, 2)])
        assert within_dispersion(pts, [0, 1, 2], model) == 0.0

    def test_three_collinear_points(self):
        # equatorial points at 0, 1, 2 degrees: pairwise distances d, d, 2d
        pts = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]])
        model = ClusterModel([GeoPoint(0, 1)])
        d = haversine_km(GeoPoint(0, 0), GeoPoint(0, 1))
        w = within_dispersion(pts, [0, 0, 0], model)
        assert w == pytest.approx(2 * d**2, rel=1e-9)

    def test_unsquared_variant(self):
        pts = np.array([[0.0, 0.0], [0.0, 1.0]])
        model = ClusterModel([GeoPoint(0, 0.5)])
        d = haversine_km(GeoPoint(0, 0), GeoPoint(0, 1))
        assert within_dispersion(pts, [0, 0], model, squared=False) == pytest.approx(
            2 * d / 4, rel=1e-12
        )

    def test_non_increasing_under_split(self, blob_data):
        points, labels = blob_data
        one = ClusterModel([GeoPoint(42.0, -78.0)])
        w_single = within_dispersion(points, np.zeros(len(points), int), one)
        three = ClusterModel([GeoPoint(lat, lon) for lat, lon in
                              [(40.0, -80.0), (44.5, -80.0), (40.0, -74.0)]])
        w_split = within_dispersion(points, labels, three)
        assert w_split <= w_single


class TestGapStatistic:
    def test_three_blobs(self, blob_data):
        points, _ = blob_data
        result = gap_statistic(points, range(1, 9), n_refs=10, seed=1)
        assert result.chosen_k == 3
        assert result.chosen_k in result.k_values
        assert result.gap[result.k_values.index(result.chosen_k)] == result.gap.max()

    def test_two_blobs(self):
        from availcast.synthetic import make_geo_blobs

        points, _ = make_geo_blobs([(40.0, -80.0), (40.0, -74.0)], 5.0, 80, seed=2)
        result = gap_statistic(points, range(1, 7), n_refs=10, seed=2)
        assert result.chosen_k == 2

    def test_uniform_points_invariants_only(self):
        rng = np.random.default_rng(5)
        points = np.column_stack(
            [rng.uniform(40, 41, 120), rng.uniform(-80, -79, 120)]
        )
        result = gap_statistic(points, range(1, 5), n_refs=5, seed=5)
        assert result.chosen_k in result.k_values
        assert len(result.gap) == len(result.k_values) == 4
        assert np.all(np.isfinite(result.gap))

    def test_bitwise_reproducible(self, blob_data):
        points, _ = blob_data
        a = gap_statistic(points, [2, 3, 4], n_refs=4, seed=9)
        b = gap_statistic(points, [2, 3, 4], n_refs=4, seed=9)
        assert np.array_equal(a.gap, b.gap)
        assert np.array_equal(a.log_wk, b.log_wk)
        assert a.chosen_k == b.chosen_k

    def test_degenerate_identical_points(self):
        points = np.tile([[40.0, -80.0]], (10, 1))
        result = gap_statistic(points, [1], n_refs=2, seed=0)
        assert np.all(np.isfinite(result.gap))

    def test_empty_k_range(self, blob_data):
        with pytest.raises(ValueError):
            gap_statistic(blob_data[0], [], n_refs=2, seed=0)
