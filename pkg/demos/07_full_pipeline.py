"""The whole pipeline through the command-line interface.

Builds a synthetic trace file plus config in a scratch directory, then
drives every subcommand in order: cluster -> featurize ->
train-availability -> build-series -> encode-gaf -> train-duration, and
finally queries both models with predict and forecast. Each step writes
its artifacts and a manifest under the output directory; rerunning the
same config reproduces every artifact byte for byte.
"""

import json
import tempfile
from datetime import timedelta
from pathlib import Path

from availcast import run_subcommand
from availcast.gaf import load_series_csv
from availcast.synthetic import make_periodic_traces, write_trace_csv

root = Path(tempfile.mkdtemp(prefix="availcast-demo-"))
print(f"--- workspace: {root}")

records = make_periodic_traces(n_services=3, span_minutes=200, seed=11)
write_trace_csv(root / "traces.csv", records)
(root / "schema.txt").write_text(
    "service_id_col=service_id\nlat_col=lat\nlon_col=lon\n"
    "timestamp_col=timestamp\ntimestamp_format=%Y-%m-%d %H:%M:%S\n"
)
config = root / "config.json"
config.write_text(json.dumps({
    "seed": 11,
    "out_dir": str(root / "artifacts"),
    "data": {"path": str(root / "traces.csv"), "schema": str(root / "schema.txt"),
             "min_service_count": 5},
    "cluster": {"k_range": [1, 6], "n_refs": 5},
    "stage1": {"max_epochs": 25},
    "series": {"granularity_s": 60},
    "gaf": {"window": 20, "stride": 2, "horizon": 3},
    "stage2": {"width_factor": 0.0625, "max_epochs": 10, "val_fraction": 0.1,
               "scheduler": {"alpha0": 0.1, "delta": 0.5, "drop": 40}},
}, indent=1))

for cmd in ("cluster", "featurize", "train-availability", "build-series",
            "encode-gaf", "train-duration"):
    print(f"\n$ availcast {cmd} --config config.json")
    assert run_subcommand([cmd, "--config", str(config)]) == 0

sample = records[0]
print("\n$ availcast predict ...")
run_subcommand([
    "predict", "--config", str(config),
    "--lat", str(sample.point.lat), "--lon", str(sample.point.lon),
    "--time", sample.timestamp.strftime("%Y-%m-%dT%H:%M:%S"), "--top", "3",
])

series = load_series_csv(root / "artifacts" / "series.csv")[0]
at = series.start + timedelta(minutes=40)
print(f"\n$ availcast forecast --service {series.service_id}"
      f" --cluster {series.cluster_id} --at {at:%Y-%m-%dT%H:%M:%S}")
run_subcommand([
    "forecast", "--config", str(config), "--service", series.service_id,
    "--cluster", str(series.cluster_id), "--at", at.strftime("%Y-%m-%dT%H:%M:%S"),
])

print("\n$ availcast eval --target stage1")
run_subcommand(["eval", "--config", str(config), "--target", "stage1"])

print(f"\n--- manifests and artifacts under {root / 'artifacts'}")
for path in sorted((root / "artifacts").iterdir()):
    print(f"  {path.name}")
