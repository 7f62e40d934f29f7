"""Trace-file ingestion, rare-service filtering, and dataset splitting."""

from __future__ import annotations

import csv
import warnings
from collections import Counter
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .features import TraceRecord
from .geo import GeoPoint, GeoValidationError


class IngestError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetSchema:
    """Column mapping for a delimited trace file.

    Timestamps are parsed with an explicit format string (no guessing) and
    taken as the dataset's local civil time. Optional epoch bounds reject
    records outside the dataset's time range.
    """

    service_id_col: str
    lat_col: str
    lon_col: str
    timestamp_col: str
    timestamp_format: str = "%Y-%m-%d %H:%M:%S"
    delimiter: str = ","
    epoch_start: datetime | None = None
    epoch_end: datetime | None = None

    def __post_init__(self):
        cols = [self.service_id_col, self.lat_col, self.lon_col, self.timestamp_col]
        if len(set(cols)) != 4:
            raise IngestError(f"schema columns must be distinct, got {cols}")

    @classmethod
    def from_file(cls, path) -> "DatasetSchema":
        """Plain key=value lines; '#' starts a comment."""
        kv: dict[str, str] = {}
        for raw in Path(path).read_text().splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise IngestError(f"{path}: bad schema line {raw!r}")
            key, value = line.split("=", 1)
            kv[key.strip()] = value.strip()
        required = {"service_id_col", "lat_col", "lon_col", "timestamp_col"}
        missing = required - kv.keys()
        if missing:
            raise IngestError(f"{path}: schema missing keys {sorted(missing)}")
        known = required | {"timestamp_format", "delimiter", "epoch_start", "epoch_end"}
        unknown = kv.keys() - known
        if unknown:
            raise IngestError(f"{path}: unknown schema keys {sorted(unknown)}")
        fmt = kv.get("timestamp_format", "%Y-%m-%d %H:%M:%S")
        return cls(
            service_id_col=kv["service_id_col"],
            lat_col=kv["lat_col"],
            lon_col=kv["lon_col"],
            timestamp_col=kv["timestamp_col"],
            timestamp_format=fmt,
            delimiter=kv.get("delimiter", ","),
            epoch_start=(
                datetime.strptime(kv["epoch_start"], fmt) if "epoch_start" in kv else None
            ),
            epoch_end=(
                datetime.strptime(kv["epoch_end"], fmt) if "epoch_end" in kv else None
            ),
        )


@dataclass
class IngestResult:
    records: list[TraceRecord]
    rejects: list[tuple[int, str]]  # (1-based line number, reason)
    total_rows: int


def ingest(path, schema: DatasetSchema) -> IngestResult:
    """Parse a delimited text file with a header row into trace records.

    Malformed rows are collected with line numbers and reasons; the call
    fails only when no row is valid or a mapped column is missing.
    Guarantees len(records) + len(rejects) == data rows.
    """
    records: list[TraceRecord] = []
    rejects: list[tuple[int, str]] = []
    total = 0
    with open(path, newline="") as f:
        reader = csv.reader(f, delimiter=schema.delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestError(f"{path}: empty file") from None
        col = {name.strip(): i for i, name in enumerate(header)}
        for role in (schema.service_id_col, schema.lat_col, schema.lon_col,
                     schema.timestamp_col):
            if role not in col:
                raise IngestError(f"{path}: mapped column {role!r} not in header {header}")

        for line_no, row in enumerate(reader, start=2):
            total += 1
            try:
                sid = row[col[schema.service_id_col]].strip()
                if not sid:
                    raise IngestError("empty service id")
                lat = float(row[col[schema.lat_col]])
                lon = float(row[col[schema.lon_col]])
                if not -90.0 <= lat <= 90.0:
                    raise IngestError("latitude out of range")
                if not -180.0 <= lon <= 180.0:
                    raise IngestError("longitude out of range")
                ts = datetime.strptime(
                    row[col[schema.timestamp_col]].strip(), schema.timestamp_format
                )
                if schema.epoch_start is not None and ts < schema.epoch_start:
                    raise IngestError("timestamp before dataset epoch")
                if schema.epoch_end is not None and ts > schema.epoch_end:
                    raise IngestError("timestamp after dataset epoch")
                records.append(TraceRecord(sid, GeoPoint(lat, lon), ts))
            except (IngestError, GeoValidationError, ValueError, IndexError) as exc:
                rejects.append((line_no, str(exc)))
    if not records:
        raise IngestError(f"{path}: no valid rows ({len(rejects)} rejected)")
    return IngestResult(records=records, rejects=rejects, total_rows=total)


def dedup_records(records):
    """Drop exact duplicates (service, point, timestamp), keeping first
    occurrences. Ingestion itself never deduplicates; opt in explicitly."""
    seen = set()
    out = []
    for r in records:
        key = (r.service_id, r.point.lat, r.point.lon, r.timestamp)
        if key not in seen:
            seen.add(key)
            out.append(r)
    return out


def filter_rare_services(records, min_count: int):
    """Drop services with fewer than min_count records.

    Returns (kept_records, removed_counts_by_service)."""
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts = Counter(r.service_id for r in records)
    removed = {sid: n for sid, n in sorted(counts.items()) if n < min_count}
    kept = [r for r in records if r.service_id not in removed]
    if records and not kept:
        warnings.warn(f"filter_rare_services removed every record (min_count={min_count})")
    return kept, removed


def split_records(records, fractions, seed: int):
    """Seeded shuffle then cut into (train, val, test); disjoint and
    exhaustive."""
    f_train, f_val, f_test = fractions
    if abs(f_train + f_val + f_test - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {fractions}")
    n = len(records)
    perm = np.random.default_rng(seed).permutation(n)
    n_train = int(round(n * f_train))
    n_val = min(int(round(n * f_val)), n - n_train)
    parts = (
        [records[i] for i in perm[:n_train]],
        [records[i] for i in perm[n_train : n_train + n_val]],
        [records[i] for i in perm[n_train + n_val :]],
    )
    for name, part in zip(("train", "val", "test"), parts):
        if not part:
            warnings.warn(f"split produced an empty {name} set")
    return parts
