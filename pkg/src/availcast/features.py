"""Feature extraction and numeric encoding of raw trace records."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

import numpy as np

from .geo import ClusterModel, GeoPoint, assign_cluster

SECONDS_PER_DAY = 86400


class FeatureError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    """One spatiotemporal observation of a service provider."""

    service_id: str
    point: GeoPoint
    timestamp: datetime

    def __post_init__(self):
        if not self.service_id:
            raise FeatureError("service_id must be non-empty")


@dataclass(frozen=True)
class HolidayCalendar:
    """Set of official-holiday dates."""

    dates: frozenset[date] = frozenset()

    @classmethod
    def from_file(cls, path) -> "HolidayCalendar":
        """Load a calendar from a text file, one ISO-8601 date per line."""
        days = set()
        for line in Path(path).read_text().splitlines():
            line = line.strip()
            if line:
                days.add(date.fromisoformat(line))
        return cls(dates=frozenset(days))

    def __contains__(self, d: date) -> bool:
        return d in self.dates


@dataclass(frozen=True)
class FeatureVector:
    """Explicit per-record features; month rides along for the optional
    month encoding."""

    lat: float
    lon: float
    time_of_day: float  # seconds since midnight, [0, 86400)
    day_of_week: int  # Monday=0 .. Sunday=6
    is_weekday: int
    is_holiday: int
    month: int  # 1..12


def features_from_point_time(
    point: GeoPoint, timestamp: datetime, cal: HolidayCalendar
) -> FeatureVector:
    tod = timestamp.hour * 3600 + timestamp.minute * 60 + timestamp.second
    dow = timestamp.weekday()
    return FeatureVector(
        lat=point.lat,
        lon=point.lon,
        time_of_day=float(tod),
        day_of_week=dow,
        is_weekday=1 if dow < 5 else 0,
        is_holiday=1 if timestamp.date() in cal else 0,
        month=timestamp.month,
    )


def extract_features(record: TraceRecord, cal: HolidayCalendar) -> FeatureVector:
    """Turn one record into the explicit feature set."""
    try:
        return features_from_point_time(record.point, record.timestamp, cal)
    except (AttributeError, TypeError) as exc:
        raise FeatureError(f"cannot extract features from {record!r}: {exc}") from exc


@dataclass(frozen=True)
class TrainingInstance:
    features: FeatureVector
    cluster_id: int
    label: int


def build_vocabulary(records) -> list[str]:
    """Sorted service-id vocabulary; label = index into this list."""
    return sorted({r.service_id for r in records})


def build_instances(
    records, model: ClusterModel, cal: HolidayCalendar
) -> tuple[list[TrainingInstance], list[str], list[str]]:
    """One instance per record: features, nearest-centroid cluster, label.

    Returns (instances, vocabulary, errors); per-record failures are
    collected, not fatal.
    """
    vocab = build_vocabulary(records)
    index = {sid: i for i, sid in enumerate(vocab)}
    instances: list[TrainingInstance] = []
    errors: list[str] = []
    for i, rec in enumerate(records):
        try:
            fv = extract_features(rec, cal)
            cid = assign_cluster(model, rec.point)
            instances.append(TrainingInstance(fv, cid, index[rec.service_id]))
        except Exception as exc:  # keep going, report afterwards
            errors.append(f"record {i} ({rec.service_id}): {exc}")
    return instances, vocab, errors


@dataclass(frozen=True)
class EncodingConfig:
    """Normalisation statistics and layout of the numeric input vector.

    Fit on the training split only; encoding is then a pure function.
    Layout: [z(lat), z(lon), time_of_day/86400, one-hot day-of-week (7),
    one-hot month (12, optional), is_weekday, is_holiday,
    one-hot cluster (k)].
    """

    n_clusters: int
    lat_mean: float = 0.0
    lat_std: float = 1.0
    lon_mean: float = 0.0
    lon_std: float = 1.0
    normalize_latlon: bool = True
    include_month: bool = False

    @classmethod
    def fit(
        cls,
        instances,
        n_clusters: int,
        normalize_latlon: bool = True,
        include_month: bool = False,
    ) -> "EncodingConfig":
        lats = np.array([inst.features.lat for inst in instances], dtype=float)
        lons = np.array([inst.features.lon for inst in instances], dtype=float)
        lat_std = float(lats.std()) if len(lats) else 1.0
        lon_std = float(lons.std()) if len(lons) else 1.0
        return cls(
            n_clusters=n_clusters,
            lat_mean=float(lats.mean()) if len(lats) else 0.0,
            lat_std=lat_std if lat_std > 0 else 1.0,
            lon_mean=float(lons.mean()) if len(lons) else 0.0,
            lon_std=lon_std if lon_std > 0 else 1.0,
            normalize_latlon=normalize_latlon,
            include_month=include_month,
        )

    @property
    def length(self) -> int:
        return 2 + 1 + 7 + (12 if self.include_month else 0) + 1 + 1 + self.n_clusters

    def to_dict(self) -> dict:
        return {
            "n_clusters": self.n_clusters,
            "lat_mean": self.lat_mean,
            "lat_std": self.lat_std,
            "lon_mean": self.lon_mean,
            "lon_std": self.lon_std,
            "normalize_latlon": self.normalize_latlon,
            "include_month": self.include_month,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EncodingConfig":
        return cls(**d)


def encode_input(fv: FeatureVector, cluster_id: int, cfg: EncodingConfig) -> np.ndarray:
    """Fixed-length float64 vector for one feature set + cluster id."""
    if not 0 <= cluster_id < cfg.n_clusters:
        raise FeatureError(
            f"cluster_id {cluster_id} outside [0, {cfg.n_clusters})"
        )
    out = np.zeros(cfg.length, dtype=np.float64)
    if cfg.normalize_latlon:
        out[0] = (fv.lat - cfg.lat_mean) / cfg.lat_std
        out[1] = (fv.lon - cfg.lon_mean) / cfg.lon_std
    else:
        out[0] = fv.lat
        out[1] = fv.lon
    out[2] = fv.time_of_day / SECONDS_PER_DAY
    out[3 + fv.day_of_week] = 1.0
    pos = 10
    if cfg.include_month:
        out[pos + fv.month - 1] = 1.0
        pos += 12
    out[pos] = fv.is_weekday
    out[pos + 1] = fv.is_holiday
    out[pos + 2 + cluster_id] = 1.0
    return out


def encode_instances(instances, cfg: EncodingConfig) -> tuple[np.ndarray, np.ndarray]:
    """Stack instances into (X, y) arrays."""
    x = np.stack([encode_input(inst.features, inst.cluster_id, cfg) for inst in instances])
    y = np.array([inst.label for inst in instances], dtype=np.int64)
    return x, y


def save_vocabulary(path, vocab: list[str]) -> None:
    Path(path).write_text("".join(f"{sid}\n" for sid in vocab))


def load_vocabulary(path) -> list[str]:
    return [line for line in Path(path).read_text().splitlines() if line]
