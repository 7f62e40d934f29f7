"""Seeded synthetic datasets for demos and desk-scale experiments."""

from __future__ import annotations

import csv
from datetime import datetime, timedelta

import numpy as np

from .features import TraceRecord
from .gaf import GafImagePair, MultiStepLabel, decode_label, encode_window
from .geo import GeoPoint

KM_PER_DEG_LAT = 111.195  # mean earth radius * pi / 180


def make_geo_blobs(centers, sigma_km: float, n_per_blob: int, seed: int = 0):
    """Gaussian blobs around (lat, lon) centers.

    Returns (points (n, 2) array, blob labels (n,)). The spread is
    isotropic in kilometres, converted to degrees at each center's
    latitude.
    """
    rng = np.random.default_rng(seed)
    points = []
    labels = []
    for i, (lat, lon) in enumerate(centers):
        dlat = rng.normal(0.0, sigma_km / KM_PER_DEG_LAT, size=n_per_blob)
        dlon = rng.normal(
            0.0, sigma_km / (KM_PER_DEG_LAT * np.cos(np.radians(lat))), size=n_per_blob
        )
        points.append(np.column_stack([lat + dlat, lon + dlon]))
        labels.append(np.full(n_per_blob, i))
    return np.vstack(points), np.concatenate(labels)


def make_service_traces(
    n_services: int,
    records_per_service: int,
    seed: int = 0,
    sigma_km: float = 2.0,
    start: datetime = datetime(2014, 4, 7, 8, 0, 0),
    center_spacing_deg: float = 5.0,
):
    """Separable stage-1 toy data: each service lives in its own blob and
    is active in its own two-hour daily slot."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_services):
        lat0 = 40.0
        lon0 = -80.0 + i * center_spacing_deg
        hour0 = 8 + (i * 3) % 12
        for j in range(records_per_service):
            day = j % 5
            second = int(rng.integers(0, 7200))
            ts = start + timedelta(days=day, hours=hour0 - 8, seconds=second)
            lat = lat0 + rng.normal(0.0, sigma_km / KM_PER_DEG_LAT)
            lon = lon0 + rng.normal(
                0.0, sigma_km / (KM_PER_DEG_LAT * np.cos(np.radians(lat0)))
            )
            records.append(TraceRecord(f"svc{i:02d}", GeoPoint(lat, lon), ts))
    return records


def make_periodic_traces(
    n_services: int = 3,
    span_minutes: int = 180,
    seed: int = 0,
    sigma_km: float = 1.0,
    start: datetime = datetime(2014, 4, 7, 8, 0, 0),
    center_spacing_deg: float = 5.0,
):
    """Per-minute traces with service-specific on/off periods, one blob per
    service; feeds the presence-series and forecasting pipeline."""
    rng = np.random.default_rng(seed)
    records = []
    for i in range(n_services):
        lat0 = 40.0
        lon0 = -80.0 + i * center_spacing_deg
        on, off = 4 + i, 2 + i
        for minute in range(span_minutes):
            if minute % (on + off) >= on:
                continue
            ts = start + timedelta(minutes=minute, seconds=int(rng.integers(0, 60)))
            lat = lat0 + rng.normal(0.0, sigma_km / KM_PER_DEG_LAT)
            lon = lon0 + rng.normal(
                0.0, sigma_km / (KM_PER_DEG_LAT * np.cos(np.radians(lat0)))
            )
            records.append(TraceRecord(f"svc{i:02d}", GeoPoint(lat, lon), ts))
    return records


def write_trace_csv(path, records, timestamp_format: str = "%Y-%m-%d %H:%M:%S") -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["service_id", "lat", "lon", "timestamp"])
        for r in records:
            writer.writerow(
                [r.service_id, repr(r.point.lat), repr(r.point.lon),
                 r.timestamp.strftime(timestamp_format)]
            )


def make_class_windows(
    n_samples: int,
    window_len: int = 32,
    horizon: int = 3,
    seed: int = 0,
    flip_prob: float = 0.03,
):
    """Binary windows whose shape encodes their own future label.

    Each of the 2**horizon classes gets a random non-constant binary
    template; samples are noisy copies cycled over the classes. Returns a
    list of (window float array, MultiStepLabel).
    """
    rng = np.random.default_rng(seed)
    n_classes = 2**horizon
    templates = rng.integers(0, 2, size=(n_classes, window_len))
    for c in range(n_classes):
        while templates[c].min() == templates[c].max():  # keep them non-constant
            templates[c] = rng.integers(0, 2, size=window_len)
    out = []
    for i in range(n_samples):
        cls = i % n_classes
        flips = rng.random(window_len) < flip_prob
        window = np.where(flips, 1 - templates[cls], templates[cls]).astype(np.float64)
        out.append((window, decode_label(cls, horizon)))
    return out


def make_gaf_pairs(
    n_samples: int,
    window_len: int = 32,
    horizon: int = 3,
    seed: int = 0,
    flip_prob: float = 0.03,
) -> list[tuple[GafImagePair, MultiStepLabel]]:
    """Encoded image pairs for the synthetic class windows."""
    return [
        (encode_window(window), label)
        for window, label in make_class_windows(
            n_samples, window_len, horizon, seed, flip_prob
        )
    ]
