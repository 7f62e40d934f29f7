"""Hotspot discovery on geolocation traces.

K-means under the great-circle (Haversine) metric, plus the gap statistic
for choosing the number of clusters against a uniform reference
distribution over the data's bounding box.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

EARTH_RADIUS_KM = 6371.0

# Dispersion is floored before taking logs so degenerate (zero-spread)
# clusterings stay finite.
_LOG_FLOOR = 1e-12


class GeoValidationError(ValueError):
    """Coordinates outside WGS84 ranges, or malformed point input."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 point in decimal degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise GeoValidationError(f"latitude out of range [-90, 90]: {self.lat!r}")
        if not (-180.0 <= self.lon <= 180.0):
            raise GeoValidationError(f"longitude out of range [-180, 180]: {self.lon!r}")


def _as_latlon(points) -> np.ndarray:
    """Coerce a GeoPoint sequence or (n, 2) array to a validated float array."""
    if isinstance(points, np.ndarray):
        arr = np.asarray(points, dtype=float)
    else:
        arr = np.array([(p.lat, p.lon) for p in points], dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise GeoValidationError(f"expected (n, 2) lat/lon data, got shape {arr.shape}")
    if arr.size and not (
        np.all(np.abs(arr[:, 0]) <= 90.0) and np.all(np.abs(arr[:, 1]) <= 180.0)
    ):
        raise GeoValidationError("coordinates outside WGS84 ranges")
    if not np.all(np.isfinite(arr)):
        raise GeoValidationError("non-finite coordinates")
    return arr


def _haversine_rad(lat1, lon1, lat2, lon2, radius_km):
    """Great-circle distance for radian arrays (broadcasting)."""
    dlat = lat2 - lat1
    dlon = lon2 - lon1
    a = np.sin(dlat / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin(dlon / 2) ** 2
    return radius_km * 2.0 * np.arctan2(np.sqrt(a), np.sqrt(np.maximum(0.0, 1.0 - a)))


def haversine_km(p1: GeoPoint, p2: GeoPoint, radius_km: float = EARTH_RADIUS_KM) -> float:
    """Great-circle distance in km between two points.

    Symmetric, zero iff the points coincide, and never exceeds pi * radius.
    """
    if radius_km <= 0:
        raise ValueError(f"radius_km must be positive, got {radius_km}")
    lat1, lon1, lat2, lon2 = map(
        math.radians, (p1.lat, p1.lon, p2.lat, p2.lon)
    )
    return float(_haversine_rad(lat1, lon1, lat2, lon2, radius_km))


def _cross_distances(a: np.ndarray, b: np.ndarray, radius_km: float) -> np.ndarray:
    """(n, m) Haversine distances between two (k, 2) degree arrays."""
    ar = np.radians(a)
    br = np.radians(b)
    return _haversine_rad(
        ar[:, None, 0], ar[:, None, 1], br[None, :, 0], br[None, :, 1], radius_km
    )


@dataclass
class ClusterModel:
    """Hotspot centroids plus the sphere radius they were trained with."""

    centroids: list[GeoPoint]
    earth_radius_km: float = EARTH_RADIUS_KM
    cost_history: list[float] = field(default_factory=list, repr=False, compare=False)

    def __post_init__(self):
        if not self.centroids:
            raise ValueError("ClusterModel requires at least one centroid")
        if self.earth_radius_km <= 0:
            raise ValueError("earth_radius_km must be positive")
        coords = {(c.lat, c.lon) for c in self.centroids}
        if len(coords) != len(self.centroids):
            raise ValueError("duplicate centroids")

    @property
    def k(self) -> int:
        return len(self.centroids)

    def centroid_array(self) -> np.ndarray:
        return np.array([(c.lat, c.lon) for c in self.centroids], dtype=float)


def assign_cluster(model: ClusterModel, p: GeoPoint) -> int:
    """Index of the nearest centroid; ties go to the smallest index."""
    d = _cross_distances(
        np.array([[p.lat, p.lon]]), model.centroid_array(), model.earth_radius_km
    )
    return int(np.argmin(d[0]))


def assign_clusters(model: ClusterModel, points) -> np.ndarray:
    """Vectorised nearest-centroid assignment for many points."""
    arr = _as_latlon(points)
    d = _cross_distances(arr, model.centroid_array(), model.earth_radius_km)
    return d.argmin(axis=1)


def _lloyd_once(arr, k, seed, max_iter, tol_km, radius_km):
    n = len(arr)
    unique = np.unique(arr, axis=0)
    if len(unique) < k:
        raise ValueError(f"only {len(unique)} distinct points for k={k}")
    rng = np.random.default_rng(seed)
    centroids = unique[rng.choice(len(unique), size=k, replace=False)].copy()

    cost_history: list[float] = []
    for _ in range(max_iter):
        d = _cross_distances(arr, centroids, radius_km)
        labels = d.argmin(axis=1)
        dist_own = d[np.arange(n), labels]

        # keep k clusters populated: promote the farthest point of the pass
        for c in range(k):
            if not np.any(labels == c):
                far = int(np.argmax(dist_own))
                centroids[c] = arr[far]
                labels[far] = c
                dist_own[far] = 0.0

        cost = float(np.sum(dist_own**2))
        if cost_history and cost > cost_history[-1] + 1e-12:
            break  # spherical mean step backfired; keep the previous state
        cost_history.append(cost)

        new_centroids = centroids.copy()
        for c in range(k):
            members = arr[labels == c]
            if len(members):
                new_centroids[c] = members.mean(axis=0)
        movement = _cross_distances(centroids, new_centroids, radius_km)
        moved = float(np.max(np.diagonal(movement)))
        centroids = new_centroids
        if moved < tol_km:
            break
    return centroids, cost_history


def kmeans_haversine(
    points,
    k: int,
    seed: int = 0,
    max_iter: int = 100,
    tol_km: float = 1e-6,
    radius_km: float = EARTH_RADIUS_KM,
    n_init: int = 4,
) -> ClusterModel:
    """Lloyd's algorithm with Haversine assignment.

    Centroids are updated as the arithmetic mean of member lat/lon degrees,
    which is a good approximation for city-scale clusters away from the
    poles and the antimeridian. Each restart initialises from k distinct
    points sampled from the data; the lowest-cost of n_init seeded restarts
    wins (random init alone lands in poor local optima often enough to
    wreck model selection). Within a run, an iteration that would increase
    the cost is rolled back and terminates the loop, so the recorded cost
    history is always non-increasing. Deterministic given the seed.
    """
    arr = _as_latlon(points)
    n = len(arr)
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n == 0:
        raise ValueError("empty input")
    if k > n:
        raise ValueError(f"k={k} exceeds number of points ({n})")
    if n_init < 1:
        raise ValueError(f"n_init must be >= 1, got {n_init}")

    best = None
    for t in range(n_init):
        centroids, history = _lloyd_once(
            arr, k, _derived_seed(seed, 3, t), max_iter, tol_km, radius_km
        )
        if best is None or history[-1] < best[1][-1]:
            best = (centroids, history)

    model = ClusterModel(
        centroids=[GeoPoint(float(lat), float(lon)) for lat, lon in best[0]],
        earth_radius_km=radius_km,
    )
    model.cost_history = best[1]
    return model


def within_dispersion(points, assignments, model: ClusterModel, squared: bool = True) -> float:
    """Normalised within-cluster dispersion.

    Sum over clusters of D_i / (2 n_i), where D_i accumulates the Haversine
    distances over ordered member pairs (squared by default; set
    squared=False for the plain-distance variant). Empty clusters
    contribute nothing.
    """
    arr = _as_latlon(points)
    labels = np.asarray(assignments)
    if len(labels) != len(arr):
        raise ValueError("assignments and points disagree in length")
    total = 0.0
    for c in range(model.k):
        members = arr[labels == c]
        ni = len(members)
        if ni < 2:
            continue
        d = _cross_distances(members, members, model.earth_radius_km)
        di = float(np.sum(d**2)) if squared else float(np.sum(d))
        total += di / (2.0 * ni)
    return total


@dataclass
class GapStatResult:
    """Per-k gap curve and the selected cluster count."""

    k_values: list[int]
    gap: np.ndarray
    log_wk: np.ndarray
    ref_log_wk_mean: np.ndarray
    chosen_k: int


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1, np.uint64)[0] >> 1)


def gap_statistic(
    points,
    k_range: Sequence[int],
    n_refs: int = 10,
    seed: int = 0,
    max_iter: int = 100,
    tol_km: float = 1e-6,
    radius_km: float = EARTH_RADIUS_KM,
    squared: bool = True,
    n_init: int = 4,
) -> GapStatResult:
    """Gap statistic over candidate cluster counts.

    For each k: gap(k) = mean_b log(W_k over reference sample b) - log(W_k
    observed). Reference samples are uniform over the axis-aligned lat/lon
    bounding box of the data, clustered with the same seeded K-means.
    chosen_k maximises the gap (ties resolve to the smallest k).
    Bit-for-bit reproducible given (points, k_range, n_refs, seed);
    reference b owns a sub-seed derived from (seed, b), so the references
    could be evaluated in any order.
    """
    arr = _as_latlon(points)
    ks = [int(k) for k in k_range]
    if not ks:
        raise ValueError("k_range must be non-empty")
    if n_refs < 1:
        raise ValueError(f"n_refs must be >= 1, got {n_refs}")

    lo = arr.min(axis=0)
    hi = arr.max(axis=0)
    refs = []
    for b in range(n_refs):
        rng_b = np.random.default_rng(np.random.SeedSequence([seed, 1, b]))
        refs.append(lo + rng_b.random(arr.shape) * (hi - lo))

    def _log_w(data: np.ndarray, k: int, km_seed: int) -> float:
        model = kmeans_haversine(
            data, k, seed=km_seed, max_iter=max_iter, tol_km=tol_km,
            radius_km=radius_km, n_init=n_init,
        )
        labels = assign_clusters(model, data)
        w = within_dispersion(data, labels, model, squared=squared)
        return math.log(max(w, _LOG_FLOOR))

    log_wk = np.array([_log_w(arr, k, _derived_seed(seed, 0, k)) for k in ks])
    ref_mean = np.array(
        [
            np.mean([_log_w(refs[b], k, _derived_seed(seed, 2, b, k)) for b in range(n_refs)])
            for k in ks
        ]
    )
    gap = ref_mean - log_wk
    chosen = ks[int(np.argmax(gap))]
    return GapStatResult(
        k_values=ks, gap=gap, log_wk=log_wk, ref_log_wk_mean=ref_mean, chosen_k=chosen
    )
