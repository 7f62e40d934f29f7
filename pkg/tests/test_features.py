from datetime import date, datetime

import numpy as np
import pytest

from availcast.features import (
    EncodingConfig,
    FeatureError,
    HolidayCalendar,
    TraceRecord,
    build_instances,
    build_vocabulary,
    encode_input,
    encode_instances,
    extract_features,
    load_vocabulary,
    save_vocabulary,
)
from availcast.geo import ClusterModel, GeoPoint


def _record(sid="s1", lat=40.0, lon=-80.0, when="2014-04-07 09:30:00"):
    return TraceRecord(sid, GeoPoint(lat, lon), datetime.fromisoformat(when))


class TestExtractFeatures:
    def test_monday_morning(self):
        fv = extract_features(_record(), HolidayCalendar())
        assert fv.day_of_week == 0  # 2014-04-07 is a Monday
        assert fv.is_weekday == 1
        assert fv.is_holiday == 0
        assert fv.time_of_day == 9 * 3600 + 30 * 60
        assert fv.month == 4

    def test_saturday_is_weekend(self):
        fv = extract_features(_record(when="2014-04-12 12:00:00"), HolidayCalendar())
        assert fv.day_of_week == 5
        assert fv.is_weekday == 0

    def test_holiday_flag(self):
        cal = HolidayCalendar(frozenset({date(2014, 4, 7)}))
        fv = extract_features(_record(), cal)
        assert fv.is_holiday == 1

    def test_empty_service_id_rejected(self):
        with pytest.raises(FeatureError):
            TraceRecord("", GeoPoint(0, 0), datetime(2014, 4, 7))


class TestCalendarFile:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "holidays.txt"
        path.write_text("2014-01-01\n2014-12-25\n\n")
        cal = HolidayCalendar.from_file(path)
        assert date(2014, 1, 1) in cal
        assert date(2014, 12, 25) in cal
        assert date(2014, 4, 7) not in cal


class TestBuildInstances:
    def setup_method(self):
        self.model = ClusterModel([GeoPoint(40.0, -80.0), GeoPoint(40.0, -74.0)])
        self.cal = HolidayCalendar()

    def test_single_service_label_zero(self):
        instances, vocab, errors = build_instances([_record()], self.model, self.cal)
        assert len(instances) == 1
        assert vocab == ["s1"]
        assert instances[0].label == 0
        assert errors == []

    def test_interleaved_services_sorted_vocab(self):
        records = [_record("b"), _record("a"), _record("b"), _record("a")]
        instances, vocab, _ = build_instances(records, self.model, self.cal)
        assert vocab == ["a", "b"]
        assert [i.label for i in instances] == [1, 0, 1, 0]

    def test_record_at_centroid(self):
        instances, _, _ = build_instances(
            [_record(lat=40.0, lon=-74.0)], self.model, self.cal
        )
        assert instances[0].cluster_id == 1

    def test_vocabulary_round_trip(self, tmp_path):
        vocab = build_vocabulary([_record("x"), _record("a"), _record("m")])
        path = tmp_path / "vocab.txt"
        save_vocabulary(path, vocab)
        assert load_vocabulary(path) == vocab == ["a", "m", "x"]


class TestEncoding:
    def _instances(self):
        records = [
            _record("a", 40.0, -80.0),
            _record("b", 41.0, -79.0, "2014-04-12 00:00:00"),
            _record("a", 42.0, -78.0, "2014-04-09 18:00:00"),
        ]
        model = ClusterModel([GeoPoint(40.0, -80.0), GeoPoint(42.0, -78.0), GeoPoint(0, 0)])
        return build_instances(records, model, HolidayCalendar())[0]

    def test_one_hot_cluster_segment(self):
        cfg = EncodingConfig(n_clusters=3)
        fv = extract_features(_record(), HolidayCalendar())
        vec = encode_input(fv, 1, cfg)
        assert len(vec) == cfg.length == 2 + 1 + 7 + 1 + 1 + 3
        assert list(vec[-3:]) == [0.0, 1.0, 0.0]

    def test_midnight_time_component(self):
        cfg = EncodingConfig(n_clusters=1)
        fv = extract_features(_record(when="2014-04-07 00:00:00"), HolidayCalendar())
        assert encode_input(fv, 0, cfg)[2] == 0.0

    def test_mean_latitude_zscores_to_zero(self):
        instances = self._instances()
        cfg = EncodingConfig.fit(instances, n_clusters=3)
        fv = extract_features(_record(lat=cfg.lat_mean), HolidayCalendar())
        assert encode_input(fv, 0, cfg)[0] == 0.0

    def test_raw_latlon_mode(self):
        instances = self._instances()
        cfg = EncodingConfig.fit(instances, n_clusters=3, normalize_latlon=False)
        fv = extract_features(_record(lat=40.0, lon=-80.0), HolidayCalendar())
        vec = encode_input(fv, 0, cfg)
        assert vec[0] == 40.0 and vec[1] == -80.0

    def test_month_one_hot_optional(self):
        cfg = EncodingConfig(n_clusters=2, include_month=True)
        fv = extract_features(_record(), HolidayCalendar())
        vec = encode_input(fv, 0, cfg)
        assert len(vec) == 2 + 1 + 7 + 12 + 1 + 1 + 2
        month_segment = vec[10:22]
        assert month_segment.sum() == 1.0 and month_segment[3] == 1.0  # April

    def test_encoding_is_pure(self):
        cfg = EncodingConfig.fit(self._instances(), n_clusters=3)
        fv = extract_features(_record(), HolidayCalendar())
        assert np.array_equal(encode_input(fv, 2, cfg), encode_input(fv, 2, cfg))

    def test_one_hot_segments_sum_to_one(self):
        instances = self._instances()
        cfg = EncodingConfig.fit(instances, n_clusters=3)
        x, y = encode_instances(instances, cfg)
        assert np.all(x[:, 3:10].sum(axis=1) == 1.0)  # day of week
        assert np.all(x[:, -3:].sum(axis=1) == 1.0)  # cluster
        assert set(np.unique(x[:, 10])) <= {0.0, 1.0}  # is_weekday
        assert set(np.unique(x[:, 11])) <= {0.0, 1.0}  # is_holiday

    def test_fitted_stats_frozen(self):
        instances = self._instances()
        cfg = EncodingConfig.fit(instances[:2], n_clusters=3)
        before = (cfg.lat_mean, cfg.lat_std, cfg.lon_mean, cfg.lon_std)
        encode_instances(instances, cfg)  # encoding unseen data
        assert (cfg.lat_mean, cfg.lat_std, cfg.lon_mean, cfg.lon_std) == before

    def test_cluster_out_of_range(self):
        cfg = EncodingConfig(n_clusters=2)
        fv = extract_features(_record(), HolidayCalendar())
        with pytest.raises(FeatureError):
            encode_input(fv, 2, cfg)
