import numpy as np
import pytest

from availcast.synthetic import make_geo_blobs

# three city-scale blobs, pairwise >= 500 km apart
BLOB_CENTERS = [(40.0, -80.0), (44.5, -80.0), (40.0, -74.0)]


@pytest.fixture(scope="session")
def blob_data():
    points, labels = make_geo_blobs(BLOB_CENTERS, sigma_km=5.0, n_per_blob=100, seed=1)
    return points, labels


def adjusted_rand_index(a, b) -> float:
    from sklearn.metrics import adjusted_rand_score

    return float(adjusted_rand_score(np.asarray(a), np.asarray(b)))
