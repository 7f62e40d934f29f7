"""Stage 1: which service is available here, now?

Two synthetic services live in separate hotspots with their own daily
hours. After clustering and feature encoding, the feedforward classifier
overfits the toy traces and answers location/time queries with a ranked
distribution over services.
"""

from datetime import datetime

import numpy as np

from availcast import (
    HolidayCalendar,
    Stage1Config,
    build_instances,
    evaluate_stage1,
    kmeans_haversine,
    predict_availability,
    train_stage1,
)
from availcast.synthetic import make_service_traces

records = make_service_traces(n_services=2, records_per_service=100, seed=5)
calendar = HolidayCalendar()
points = np.array([(r.point.lat, r.point.lon) for r in records])
cluster_model = kmeans_haversine(points, 2, seed=5)
instances, vocab, _ = build_instances(records, cluster_model, calendar)
print(f"--- {len(instances)} instances over services {vocab}")

cfg = Stage1Config(
    hidden=((16, 0.01), (16, 0.01), (8, 0.01)),
    batch_size=32, learning_rate=0.01, max_epochs=300, seed=5,
    stop_tol=0.0, train_fraction=1.0, val_fraction=0.0, test_fraction=0.0,
)
model = train_stage1(instances, cfg, cluster_model, vocab)
print(f"--- trained {len(model.history)} epochs,"
      f" final train loss {model.history[-1].train_loss:.4f}")
print(f"--- training error rate: {evaluate_stage1(model, instances):.3f}")

print("\n--- queries")
queries = [
    (records[0].point, records[0].timestamp, "svc00 home turf, its hours"),
    (records[100].point, records[100].timestamp, "svc01 home turf, its hours"),
]
for point, when, note in queries:
    ranked = predict_availability(model, point, when, calendar)
    top, prob = ranked[0]
    print(f"  ({point.lat:6.2f}, {point.lon:7.2f}) at {when:%H:%M}: "
          f"{top} with p={prob:.3f}   [{note}]")

when = datetime(2014, 4, 7, 9, 0, 0)
ranked = predict_availability(model, records[0].point, when, calendar)
print("\n--- full distribution at the first query point:")
for sid, p in ranked:
    print(f"  {sid}: {p:.4f}")
