"""Discover hotspot regions from geolocation traces.

Three synthetic city-scale blobs, hundreds of kilometres apart, stand in
for the home regions of three service providers. K-means under the
great-circle metric recovers them, and the gap statistic picks the
cluster count without being told.
"""

import numpy as np

from availcast import (
    GeoPoint,
    assign_clusters,
    gap_statistic,
    haversine_km,
    kmeans_haversine,
    within_dispersion,
)
from availcast.synthetic import make_geo_blobs

centers = [(40.0, -80.0), (44.5, -80.0), (40.0, -74.0)]
points, true_labels = make_geo_blobs(centers, sigma_km=5.0, n_per_blob=100, seed=1)

print("--- great-circle distances between blob centers (km)")
for i in range(3):
    for j in range(i + 1, 3):
        d = haversine_km(GeoPoint(*centers[i]), GeoPoint(*centers[j]))
        print(f"  blob {i} <-> blob {j}: {d:8.1f}")

print("\n--- gap statistic over k = 1..8 (10 uniform reference samples)")
result = gap_statistic(points, range(1, 9), n_refs=10, seed=1)
for k, gap in zip(result.k_values, result.gap):
    marker = "  <-- chosen" if k == result.chosen_k else ""
    print(f"  k={k}: gap = {gap:7.3f}{marker}")

print(f"\n--- K-means with k = {result.chosen_k}")
model = kmeans_haversine(points, result.chosen_k, seed=1)
labels = assign_clusters(model, points)
for c, centroid in enumerate(model.centroids):
    n = int(np.sum(labels == c))
    print(f"  cluster {c}: centroid ({centroid.lat:7.3f}, {centroid.lon:8.3f}), {n} points")
print(f"  within-cluster dispersion: {within_dispersion(points, labels, model):.1f} km^2")
print(f"  Lloyd cost per iteration (never increases): "
      f"{[round(c) for c in model.cost_history]}")
