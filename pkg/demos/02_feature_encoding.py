"""From raw trace records to numeric training vectors.

Each record turns into the explicit feature set (position, time of day,
day of week, weekday/holiday flags), gets a hotspot cluster id, and is
encoded into the fixed-length vector the availability classifier
consumes.
"""

from datetime import date, datetime

from availcast import (
    EncodingConfig,
    GeoPoint,
    HolidayCalendar,
    TraceRecord,
    build_instances,
    encode_input,
    extract_features,
)
from availcast.geo import ClusterModel

calendar = HolidayCalendar(frozenset({date(2014, 12, 25), date(2014, 7, 4)}))
cluster_model = ClusterModel([GeoPoint(40.0, -80.0), GeoPoint(40.0, -74.0)])

records = [
    TraceRecord("wifi-a", GeoPoint(40.01, -80.02), datetime(2014, 4, 7, 9, 30, 0)),
    TraceRecord("wifi-b", GeoPoint(39.99, -74.01), datetime(2014, 4, 12, 22, 15, 30)),
    TraceRecord("wifi-a", GeoPoint(40.02, -79.98), datetime(2014, 7, 4, 12, 0, 0)),
]

print("--- per-record features")
for r in records:
    fv = extract_features(r, calendar)
    print(f"  {r.service_id}: dow={fv.day_of_week} weekday={fv.is_weekday}"
          f" holiday={fv.is_holiday} time_of_day={fv.time_of_day:.0f}s")

instances, vocab, errors = build_instances(records, cluster_model, calendar)
print(f"\n--- instances: {len(instances)}, vocabulary {vocab}, errors {errors}")
for inst in instances:
    print(f"  label={inst.label} ({vocab[inst.label]}) cluster={inst.cluster_id}")

encoding = EncodingConfig.fit(instances, cluster_model.k)
print(f"\n--- encoded vectors (length {encoding.length}: "
      "z-lat, z-lon, day-fraction, 7x dow, weekday, holiday, 2x cluster)")
for inst in instances:
    vec = encode_input(inst.features, inst.cluster_id, encoding)
    print("  " + " ".join(f"{v:5.2f}" for v in vec))
