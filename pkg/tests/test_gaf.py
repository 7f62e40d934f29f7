import math
from datetime import datetime, timedelta

import numpy as np
import pytest

from availcast.gaf import (
    GafImagePair,
    PresenceSeries,
    SeriesError,
    augment,
    balance_classes,
    build_presence_series,
    decode_label,
    encode_window,
    gadf,
    gasf,
    load_gaf_dataset,
    load_series_csv,
    make_label,
    paa,
    perturb_zero_series,
    rescale_to_unit,
    roll_windows,
    save_gaf_dataset,
    save_series_csv,
    to_polar,
)
from availcast.features import TraceRecord
from availcast.geo import ClusterModel, GeoPoint


class TestPresenceSeries:
    def _records(self, minutes):
        start = datetime(2014, 4, 7, 8, 0, 0)
        return [
            TraceRecord("s1", GeoPoint(40.0, -80.0), start + timedelta(minutes=m))
            for m in minutes
        ]

    def setup_method(self):
        self.model = ClusterModel([GeoPoint(40.0, -80.0), GeoPoint(40.0, -74.0)])

    def test_single_mark(self):
        # s1 appears only in minute 3 of a 5-minute span framed by s2 records
        s1 = self._records([3])
        start = datetime(2014, 4, 7, 8, 0, 0)
        framing = [
            TraceRecord("s2", GeoPoint(40.0, -74.0), start),
            TraceRecord("s2", GeoPoint(40.0, -74.0), start + timedelta(minutes=4)),
        ]
        series = build_presence_series(s1 + framing, self.model, "s1", 0, 60)
        assert list(series.values) == [0, 0, 0, 1, 0]

    def test_every_step_present(self):
        series = build_presence_series(self._records([0, 1, 2]), self.model, "s1", 0, 60)
        assert list(series.values) == [1, 1, 1]

    def test_wrong_cluster_all_zero(self):
        series = build_presence_series(self._records([0, 1, 2]), self.model, "s1", 1, 60)
        assert list(series.values) == [0, 0, 0]

    def test_missing_service_errors(self):
        with pytest.raises(SeriesError, match="no records for service"):
            build_presence_series(self._records([0]), self.model, "nope", 0, 60)

    def test_binary_invariant(self):
        with pytest.raises(SeriesError):
            PresenceSeries("s", 0, 60, datetime(2014, 1, 1), np.array([0, 2]))


class TestRollWindows:
    def test_enumerated_starts(self):
        # n=10, window 4, stride 2, horizon 1: starts satisfy s + 5 <= 10
        out = roll_windows(np.arange(10), 4, 2, 1)
        starts = [int(w[0]) for w, _ in out]
        assert starts == [0, 2, 4]

    def test_single_window(self):
        out = roll_windows(np.arange(10), 9, 1, 1)
        assert len(out) == 1
        assert list(out[0][1]) == [9]

    def test_no_room_for_labels(self):
        assert roll_windows(np.arange(10), 10, 3, 1) == []

    def test_starts_form_arithmetic_progression(self):
        rng = np.random.default_rng(0)
        values = rng.integers(0, 2, size=53)
        out = roll_windows(np.arange(53), 7, 3, 2)
        starts = [int(w[0]) for w, _ in out]
        assert starts == list(range(0, starts[-1] + 1, 3))
        assert all(len(w) == 7 and len(f) == 2 for w, f in roll_windows(values, 7, 3, 2))

    def test_bad_arguments(self):
        with pytest.raises(SeriesError):
            roll_windows(np.arange(5), 0, 1, 1)
        with pytest.raises(SeriesError):
            roll_windows(np.arange(5), 6, 1, 1)
        with pytest.raises(SeriesError):
            roll_windows(np.arange(5), 2, 0, 1)


class TestLabels:
    def test_paper_listing_order(self):
        # gamma=3 listing: 000,100,010,110,001,101,011,111 -> classes 0..7
        listing = ["000", "100", "010", "110", "001", "101", "011", "111"]
        for expect, bits in enumerate(listing):
            label = make_label([int(b) for b in bits])
            assert label.class_index == expect

    def test_all_zero_and_all_one(self):
        assert make_label([0, 0, 0]).class_index == 0
        assert make_label([1, 1, 1]).class_index == 7

    def test_gamma_two(self):
        assert make_label([0, 1]).class_index == 2

    def test_round_trip_all_gammas(self):
        for gamma in (1, 2, 3):
            for cls in range(2**gamma):
                label = decode_label(cls, gamma)
                assert make_label(label.bits).class_index == cls

    def test_non_binary_rejected(self):
        with pytest.raises(SeriesError):
            make_label([0, 0.5, 1])

    def test_long_horizon_gated(self):
        with pytest.raises(SeriesError):
            make_label([0, 1, 0, 1])
        assert make_label([0, 1, 0, 1], max_horizon=4).class_index == 10


class TestPerturbAndRescale:
    def test_all_zero_window(self):
        out = perturb_zero_series(np.zeros(3))
        assert np.array_equal(out, [1e-3, 1e-3, 1e-3])

    def test_mixed_window_unchanged(self):
        assert np.array_equal(perturb_zero_series(np.array([0.0, 1.0, 0.0])), [0, 1, 0])
        assert np.array_equal(perturb_zero_series(np.array([1.0, 1.0])), [1, 1])

    def test_rescale_endpoints_exact(self):
        out = rescale_to_unit(np.array([0.0, 1.0]))
        assert out[0] == -1.0 and out[1] == 1.0
        out = rescale_to_unit(np.array([0.0, 0.5, 1.0]))
        assert np.array_equal(out, [-1.0, 0.0, 1.0])

    def test_rescale_random_endpoints(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            w = rng.normal(size=rng.integers(2, 30)) * rng.uniform(0.1, 50)
            out = rescale_to_unit(w)
            assert out.min() == -1.0 and out.max() == 1.0

    def test_degenerate_constant(self):
        assert np.array_equal(rescale_to_unit(np.array([4.2, 4.2])), [0.0, 0.0])


class TestPolar:
    def test_angles(self):
        psi, _ = to_polar(np.array([1.0, 0.0, -1.0]))
        assert psi[0] == 0.0
        assert psi[1] == pytest.approx(math.pi / 2, rel=1e-15)
        assert psi[2] == pytest.approx(math.pi, rel=1e-15)

    def test_radius_ratio(self):
        _, rho = to_polar(np.zeros(10), span_constant=10)
        assert rho[5] == 0.5

    def test_out_of_range_rejected(self):
        with pytest.raises(SeriesError):
            to_polar(np.array([1.1]))


class TestFields:
    def test_gasf_examples(self):
        assert gasf(np.array([1.0]))[0, 0] == pytest.approx(1.0, abs=1e-15)
        assert gasf(np.array([0.0]))[0, 0] == pytest.approx(-1.0, abs=1e-15)
        assert np.allclose(gasf(np.array([1.0, -1.0])), [[1, -1], [-1, 1]], atol=1e-15)

    def test_gadf_examples(self):
        d = gadf(np.array([1.0, 0.0]))
        assert np.allclose(d, [[0, -1], [1, 0]], atol=1e-15)

    def test_algebra_over_random_windows(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            w = rescale_to_unit(rng.random(rng.integers(2, 24)))
            g = gasf(w)
            d = gadf(w)
            assert np.abs(g - g.T).max() == 0.0  # exact symmetry
            assert np.abs(d + d.T).max() == 0.0  # exact antisymmetry
            assert np.abs(np.diagonal(d)).max() == 0.0
            assert np.abs(np.diagonal(g) - (2 * w**2 - 1)).max() < 1e-12
            s = np.sqrt(1 - w**2)
            assert np.abs(g - (np.outer(w, w) - np.outer(s, s))).max() < 1e-12
            assert np.abs(g).max() <= 1.0 and np.abs(d).max() <= 1.0

    def test_gadf_sum_mode(self):
        w = np.array([1.0, 0.0])
        psi = np.arccos(w)
        expect = np.sin(psi[:, None] + psi[None, :])
        assert np.allclose(gadf(w, mode="sum"), expect, atol=1e-15)

    def test_encode_window_all_zero_is_degenerate_flat(self):
        pair = encode_window(np.zeros(8))
        # epsilon-constant window rescales to zeros: psi = pi/2 everywhere
        assert np.allclose(pair.gasf, -1.0)
        assert np.allclose(pair.gadf, 0.0)


class TestPaa:
    def test_frame_means(self):
        assert np.array_equal(paa(np.array([1.0, 1.0, 3.0, 3.0]), 2), [1.0, 3.0])

    def test_identity_and_constant(self):
        w = np.array([2.0, 4.0, 8.0])
        assert np.array_equal(paa(w, 3), w)
        assert np.array_equal(paa(np.full(6, 3.5), 2), [3.5, 3.5])

    def test_mean_preserved_when_divisible(self):
        rng = np.random.default_rng(3)
        for _ in range(100):
            m = int(rng.integers(1, 8))
            w = rng.normal(size=m * int(rng.integers(1, 6)))
            assert abs(paa(w, m).mean() - w.mean()) < 1e-12

    def test_remainder_spread_to_leading_frames(self):
        out = paa(np.array([1.0, 2.0, 3.0, 4.0, 5.0]), 2)
        assert np.array_equal(out, [2.0, 4.5])  # frames [1,2,3], [4,5]

    def test_target_too_long(self):
        with pytest.raises(SeriesError):
            paa(np.ones(3), 4)


class TestAugment:
    def test_identity_transform(self):
        img = np.random.default_rng(0).random((12, 12))
        assert np.abs(augment(img, 0.0, 0.0) - img).max() == 0.0

    def test_full_turn(self):
        img = np.random.default_rng(1).random((16, 16))
        assert np.abs(augment(img, 360.0, 0.0) - img).max() < 1e-6

    def test_mean_intensity_roughly_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            img = rng.random((32, 32))
            before = np.abs(img).mean()
            after = np.abs(augment(img, 40.0, 0.0)).mean()
            assert 0.8 * before <= after <= 1.2 * before


class TestBalance:
    def _samples(self, counts):
        rng = np.random.default_rng(4)
        out = []
        for cls, n in counts.items():
            for _ in range(n):
                w = rescale_to_unit(rng.random(8))
                out.append((GafImagePair(gasf(w), gadf(w)), decode_label(cls, 3)))
        return out

    def test_oversamples_minority(self):
        balanced = balance_classes(self._samples({0: 90, 7: 10}), seed=0)
        counts = {}
        for _, label in balanced:
            counts[label.class_index] = counts.get(label.class_index, 0) + 1
        assert 81 <= counts[0] <= 99
        assert 81 <= counts[7] <= 99

    def test_already_balanced_unchanged(self):
        samples = self._samples({0: 20, 1: 20})
        assert len(balance_classes(samples, seed=0)) == len(samples)

    def test_single_class_warns(self):
        samples = self._samples({3: 5})
        with pytest.warns(UserWarning, match="single-class"):
            out = balance_classes(samples, seed=0)
        assert len(out) == 5

    def test_missing_classes_reported(self):
        with pytest.warns(UserWarning, match="no samples"):
            balance_classes(self._samples({0: 10, 1: 2}), seed=0)


class TestFiles:
    def test_gaf_dataset_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        ga = rng.random((4, 8, 8)).astype(np.float32)
        gd = rng.random((4, 8, 8)).astype(np.float32)
        labels = np.array([0, 3, 7, 1])
        path = tmp_path / "pairs.bin"
        save_gaf_dataset(path, ga, gd, labels, 3)
        ga2, gd2, labels2, horizon = load_gaf_dataset(path)
        assert np.array_equal(ga, ga2) and np.array_equal(gd, gd2)
        assert np.array_equal(labels, labels2) and horizon == 3

    def test_gaf_dataset_bad_magic(self, tmp_path):
        path = tmp_path / "junk.bin"
        path.write_bytes(b"NOTAGAF0" + b"\x00" * 40)
        with pytest.raises(SeriesError):
            load_gaf_dataset(path)

    def test_series_csv_round_trip(self, tmp_path):
        series = PresenceSeries(
            "s1", 2, 60, datetime(2014, 4, 7, 8, 0, 0),
            np.array([0, 1, 1, 0, 1], dtype=np.uint8),
        )
        path = tmp_path / "series.csv"
        save_series_csv(path, [series])
        loaded = load_series_csv(path)[0]
        assert loaded.service_id == "s1" and loaded.cluster_id == 2
        assert loaded.start == series.start
        assert np.array_equal(loaded.values, series.values)

    def test_png_export(self, tmp_path):
        pytest.importorskip("PIL")
        from availcast.gaf import save_gaf_png

        w = rescale_to_unit(np.random.default_rng(0).random(8))
        out = tmp_path / "img.png"
        save_gaf_png(gasf(w), out)
        assert out.stat().st_size > 0
