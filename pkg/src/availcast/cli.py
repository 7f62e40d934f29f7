"""End-to-end command-line workflow.

Subcommands: cluster, featurize, train-availability, predict,
build-series, encode-gaf, train-duration, forecast, eval. Every
subcommand reads one JSON config (--config), writes its artifacts under
the configured output directory, and records a run manifest with the
resolved configuration, seeds, and input/output checksums. Runs carry no
hidden randomness, so re-running a config reproduces artifact checksums
byte for byte.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import sys
from datetime import datetime
from pathlib import Path

import numpy as np

from . import gaf as gaf_mod
from .availability import (
    Stage1Config,
    evaluate_stage1,
    predict_availability,
    train_stage1,
)
from .config import ConfigError, config_hash, flatten_config, load_pipeline_config
from .containers import ContainerError, expect_type, load_model, save_model
from .duration import Stage2Config, evaluate_stage2, forecast, train_stage2
from .features import (
    FeatureError,
    HolidayCalendar,
    build_instances,
    load_vocabulary,
    save_vocabulary,
)
from .gaf import (
    GafImagePair,
    SeriesError,
    build_presence_series,
    load_gaf_dataset,
    load_series_csv,
    make_label,
    save_gaf_dataset,
    save_gaf_png,
    save_series_csv,
)
from .geo import GeoPoint, GeoValidationError, gap_statistic, kmeans_haversine
from .ingest import (
    DatasetSchema,
    IngestError,
    dedup_records,
    filter_rare_services,
    ingest,
)
from .nn import SchedulerConfig
from .persist import (
    cluster_from_container,
    cluster_to_container,
    load_instances_csv,
    save_instances_csv,
    stage1_from_container,
    stage1_to_container,
    stage2_from_container,
    stage2_to_container,
)

TIME_FORMAT = "%Y-%m-%dT%H:%M:%S"


class PipelineError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_manifest(out_dir: Path, subcommand: str, cfg: dict,
                    inputs: dict[str, Path], outputs: dict[str, Path],
                    extra: dict | None = None) -> Path:
    lines = {
        "subcommand": subcommand,
        "config_hash": config_hash(cfg),
        "seed": str(cfg["seed"]),
    }
    lines.update({f"config.{k}": v for k, v in flatten_config(cfg).items()})
    for name, path in inputs.items():
        lines[f"input.{name}.path"] = str(path)
        lines[f"input.{name}.sha256"] = _sha256(Path(path))
    for name, path in outputs.items():
        lines[f"output.{name}.path"] = str(Path(path).name)
        lines[f"output.{name}.sha256"] = _sha256(Path(path))
    for key, value in (extra or {}).items():
        lines[str(key)] = str(value)
    manifest = out_dir / f"manifest-{subcommand}.txt"
    manifest.write_text("".join(f"{k}={lines[k]}\n" for k in sorted(lines)))
    return manifest


def _load_traces(cfg: dict):
    data = cfg["data"]
    if not data["path"] or not data["schema"]:
        raise PipelineError("config", "data.path and data.schema are required")
    schema = DatasetSchema.from_file(data["schema"])
    result = ingest(data["path"], schema)
    records = dedup_records(result.records) if data["dedup"] else result.records
    records, removed = filter_rare_services(records, data["min_service_count"])
    if not records:
        raise PipelineError("data", "no records left after rare-service filtering")
    return records, result.rejects, removed


def _write_rejects(out_dir: Path, subcommand: str, rejects) -> Path:
    path = out_dir / f"rejects-{subcommand}.csv"
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["line", "reason"])
        writer.writerows(rejects)
    return path


def _calendar(cfg: dict) -> HolidayCalendar:
    path = cfg["data"]["holidays"]
    return HolidayCalendar.from_file(path) if path else HolidayCalendar()


def _out_dir(cfg: dict) -> Path:
    out = Path(cfg["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_cluster(cfg: dict) -> int:
    out = _out_dir(cfg)
    records, rejects, _ = _load_traces(cfg)
    points = np.array([(r.point.lat, r.point.lon) for r in records])
    ccfg = cfg["cluster"]
    extra: dict = {}
    if ccfg["k"] is not None:
        chosen_k = int(ccfg["k"])
    else:
        lo, hi = ccfg["k_range"]
        result = gap_statistic(
            points, list(range(int(lo), int(hi) + 1)), n_refs=ccfg["n_refs"],
            seed=cfg["seed"], max_iter=ccfg["max_iter"], tol_km=ccfg["tol_km"],
        )
        chosen_k = result.chosen_k
        extra["gap_values"] = ",".join(f"{g:.6f}" for g in result.gap)
    model = kmeans_haversine(
        points, chosen_k, seed=cfg["seed"], max_iter=ccfg["max_iter"], tol_km=ccfg["tol_km"]
    )
    extra["chosen_k"] = chosen_k
    container = cluster_to_container(model, meta={"chosen_k": chosen_k, "seed": cfg["seed"]})
    model_path = out / "cluster.model"
    save_model(container, model_path)
    rejects_path = _write_rejects(out, "cluster", rejects)
    _write_manifest(
        out, "cluster", cfg,
        inputs={"traces": cfg["data"]["path"], "schema": cfg["data"]["schema"]},
        outputs={"cluster_model": model_path, "rejects": rejects_path},
        extra=extra,
    )
    print(f"cluster: k={chosen_k}, {len(records)} records -> {model_path}")
    return 0


def _cmd_featurize(cfg: dict) -> int:
    out = _out_dir(cfg)
    records, rejects, _ = _load_traces(cfg)
    cluster = cluster_from_container(expect_type(load_model(out / "cluster.model"), "cluster"))
    instances, vocab, errors = build_instances(records, cluster, _calendar(cfg))
    if errors:
        print(f"featurize: {len(errors)} records failed feature extraction", file=sys.stderr)
    inst_path = out / "instances.csv"
    vocab_path = out / "vocab.txt"
    save_instances_csv(inst_path, instances, vocab)
    save_vocabulary(vocab_path, vocab)
    rejects_path = _write_rejects(out, "featurize", rejects)
    _write_manifest(
        out, "featurize", cfg,
        inputs={"traces": cfg["data"]["path"], "cluster_model": out / "cluster.model"},
        outputs={"instances": inst_path, "vocab": vocab_path, "rejects": rejects_path},
        extra={"n_instances": len(instances), "n_services": len(vocab)},
    )
    print(f"featurize: {len(instances)} instances, {len(vocab)} services -> {inst_path}")
    return 0


def _stage1_config(cfg: dict) -> Stage1Config:
    s1 = cfg["stage1"]
    return Stage1Config(
        hidden=tuple(tuple(h) for h in s1["hidden"]),
        batch_size=s1["batch_size"],
        learning_rate=s1["learning_rate"],
        stop_tol=s1["stop_tol"],
        patience=s1["patience"],
        max_epochs=s1["max_epochs"],
        seed=cfg["seed"],
        train_fraction=cfg["split"]["train"],
        val_fraction=cfg["split"]["val"],
        test_fraction=cfg["split"]["test"],
        normalize_latlon=cfg["features"]["normalize_latlon"],
        include_month=cfg["features"]["include_month"],
    )


def _write_epochs_csv(path, history) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["epoch", "learning_rate", "train_loss", "val_loss", "val_error"])
        for rec in history:
            writer.writerow(
                [rec.epoch, repr(rec.learning_rate), repr(rec.train_loss),
                 repr(rec.val_loss), repr(rec.val_error)]
            )


def _cmd_train_availability(cfg: dict) -> int:
    out = _out_dir(cfg)
    instances = load_instances_csv(out / "instances.csv")
    vocab = load_vocabulary(out / "vocab.txt")
    cluster = cluster_from_container(expect_type(load_model(out / "cluster.model"), "cluster"))
    model = train_stage1(instances, _stage1_config(cfg), cluster, vocab)
    model_path = out / "stage1.model"
    save_model(stage1_to_container(model), model_path)
    epochs_path = out / "stage1-epochs.csv"
    _write_epochs_csv(epochs_path, model.history)
    test_idx = model.split_indices["test"]
    test_error = (
        evaluate_stage1(model, [instances[i] for i in test_idx]) if len(test_idx) else np.nan
    )
    _write_manifest(
        out, "train-availability", cfg,
        inputs={"instances": out / "instances.csv", "vocab": out / "vocab.txt",
                "cluster_model": out / "cluster.model"},
        outputs={"stage1_model": model_path, "epochs": epochs_path},
        extra={"epochs_run": len(model.history), "test_error": f"{test_error:.6f}"},
    )
    print(
        f"train-availability: {len(model.history)} epochs,"
        f" final val loss {model.history[-1].val_loss:.6f},"
        f" test error {test_error:.4f} -> {model_path}"
    )
    return 0


def _cmd_predict(cfg: dict, args) -> int:
    out = _out_dir(cfg)
    model = stage1_from_container(expect_type(load_model(out / "stage1.model"), "stage1"))
    try:
        point = GeoPoint(args.lat, args.lon)
        when = datetime.strptime(args.time, TIME_FORMAT)
    except ValueError as exc:
        raise PipelineError("data", f"bad query: {exc}") from exc
    ranking = predict_availability(model, point, when, _calendar(cfg))
    for sid, prob in ranking[: args.top]:
        print(f"{sid}\t{prob:.6f}")
    return 0


def _cmd_build_series(cfg: dict) -> int:
    out = _out_dir(cfg)
    records, rejects, _ = _load_traces(cfg)
    cluster = cluster_from_container(expect_type(load_model(out / "cluster.model"), "cluster"))
    granularity = cfg["series"]["granularity_s"]
    services = sorted({r.service_id for r in records})
    series_list = []
    for sid in services:
        for cid in range(cluster.k):
            series = build_presence_series(records, cluster, sid, cid, granularity)
            if series.values.any():
                series_list.append(series)
    if not series_list:
        raise PipelineError("data", "no (service, cluster) pair has any presence")
    series_path = out / "series.csv"
    save_series_csv(series_path, series_list)
    rejects_path = _write_rejects(out, "build-series", rejects)
    _write_manifest(
        out, "build-series", cfg,
        inputs={"traces": cfg["data"]["path"], "cluster_model": out / "cluster.model"},
        outputs={"series": series_path, "rejects": rejects_path},
        extra={"n_series": len(series_list)},
    )
    print(f"build-series: {len(series_list)} series -> {series_path}")
    return 0


def _window_pair(window, gaf_cfg: dict, meta: dict) -> GafImagePair:
    w = np.asarray(window, dtype=np.float64)
    if gaf_cfg["paa"]:
        w = gaf_mod.paa(w, int(gaf_cfg["paa"]))
    unit = gaf_mod.rescale_to_unit(gaf_mod.perturb_zero_series(w, gaf_cfg["epsilon"]))
    return GafImagePair(gaf_mod.gasf(unit), gaf_mod.gadf(unit), meta=meta)


def _cmd_encode_gaf(cfg: dict) -> int:
    out = _out_dir(cfg)
    series_list = load_series_csv(out / "series.csv")
    gcfg = cfg["gaf"]
    horizon = int(gcfg["horizon"])
    gasf_images, gadf_images, labels = [], [], []
    for series in series_list:
        if len(series) < gcfg["window"] + horizon:
            continue
        for i, (window, future) in enumerate(
            gaf_mod.roll_windows(series, gcfg["window"], gcfg["stride"], horizon)
        ):
            pair = _window_pair(
                window, gcfg,
                meta={"service_id": series.service_id, "cluster_id": series.cluster_id},
            )
            gasf_images.append(pair.gasf)
            gadf_images.append(pair.gadf)
            labels.append(make_label(future, max_horizon=max(3, horizon)).class_index)
    if not labels:
        raise PipelineError("data", "no window fits any series; shrink gaf.window")
    gaf_path = out / "gaf.bin"
    save_gaf_dataset(gaf_path, gasf_images, gadf_images, labels, horizon)
    outputs = {"gaf": gaf_path}
    if gcfg["png_dir"]:
        png_dir = Path(gcfg["png_dir"])
        png_dir.mkdir(parents=True, exist_ok=True)
        for i, (ga, gd) in enumerate(zip(gasf_images, gadf_images)):
            save_gaf_png(ga, png_dir / f"sample{i:05d}-gasf.png")
            save_gaf_png(gd, png_dir / f"sample{i:05d}-gadf.png")
    _write_manifest(
        out, "encode-gaf", cfg,
        inputs={"series": out / "series.csv"},
        outputs=outputs,
        extra={"n_samples": len(labels),
               "image_size": int(gasf_images[0].shape[0])},
    )
    print(f"encode-gaf: {len(labels)} image pairs -> {gaf_path}")
    return 0


def _stage2_config(cfg: dict, input_size: int, horizon: int) -> Stage2Config:
    s2 = cfg["stage2"]
    sched = s2["scheduler"]
    return Stage2Config(
        horizon=horizon,
        input_size=input_size,
        channels=tuple(s2["channels"]),
        width_factor=s2["width_factor"],
        scheduler=SchedulerConfig(sched["alpha0"], sched["delta"], sched["drop"]),
        batch_size=s2["batch_size"],
        max_epochs=s2["max_epochs"],
        patience=s2["patience"],
        val_fraction=s2["val_fraction"],
        seed=cfg["seed"],
        balance=s2["balance"],
        rotation_deg=s2["rotation_deg"],
        shear_factor=s2["shear_factor"],
        use_batch_norm=s2["use_batch_norm"],
        max_horizon=max(3, horizon),
    )


def _pairs_from_file(path):
    ga, gd, labels, horizon = load_gaf_dataset(path)
    pairs = []
    for i in range(len(labels)):
        pairs.append(
            (
                GafImagePair(ga[i].astype(np.float64), gd[i].astype(np.float64)),
                gaf_mod.decode_label(int(labels[i]), horizon),
            )
        )
    return pairs, ga.shape[1], horizon


def _cmd_train_duration(cfg: dict) -> int:
    out = _out_dir(cfg)
    pairs, input_size, horizon = _pairs_from_file(out / "gaf.bin")
    model = train_stage2(pairs, _stage2_config(cfg, input_size, horizon))
    model_path = out / "stage2.model"
    save_model(stage2_to_container(model), model_path)
    epochs_path = out / "stage2-epochs.csv"
    _write_epochs_csv(epochs_path, model.history)
    _write_manifest(
        out, "train-duration", cfg,
        inputs={"gaf": out / "gaf.bin"},
        outputs={"stage2_model": model_path, "epochs": epochs_path},
        extra={"epochs_run": len(model.history), "n_pairs": len(pairs)},
    )
    print(
        f"train-duration: {len(model.history)} epochs,"
        f" final train loss {model.history[-1].train_loss:.6f} -> {model_path}"
    )
    return 0


def _cmd_forecast(cfg: dict, args) -> int:
    out = _out_dir(cfg)
    model = stage2_from_container(expect_type(load_model(out / "stage2.model"), "stage2"))
    series_list = load_series_csv(out / "series.csv")
    wanted = [
        s for s in series_list
        if s.service_id == args.service and s.cluster_id == args.cluster
    ]
    if not wanted:
        raise PipelineError(
            "data", f"no series for service {args.service!r} cluster {args.cluster}"
        )
    series = wanted[0]
    try:
        at = datetime.strptime(args.at, TIME_FORMAT)
    except ValueError as exc:
        raise PipelineError("data", f"bad --at timestamp: {exc}") from exc
    window_len = cfg["gaf"]["window"]
    idx = int((at - series.start).total_seconds() // series.granularity_s)
    if idx >= len(series) or idx - window_len + 1 < 0:
        raise PipelineError(
            "data",
            f"--at needs {window_len} steps of history inside the series"
            f" (step {idx} of {len(series)})",
        )
    window = series.values[idx - window_len + 1 : idx + 1].astype(np.float64)
    pair = _window_pair(window, cfg["gaf"], meta={})
    label, probs = forecast(model, pair)
    print("".join(str(b) for b in label.bits))
    for cls, p in enumerate(probs):
        print(f"class {cls} ({''.join(str(b) for b in gaf_mod.decode_label(cls, label.horizon).bits)})\t{p:.6f}")
    return 0


def _cmd_eval(cfg: dict, args) -> int:
    out = _out_dir(cfg)
    if args.target == "stage1":
        model = stage1_from_container(expect_type(load_model(out / "stage1.model"), "stage1"))
        instances = load_instances_csv(out / "instances.csv")
        perm = np.random.default_rng(model.config.seed).permutation(len(instances))
        n_train = int(round(len(instances) * model.config.train_fraction))
        n_val = min(int(round(len(instances) * model.config.val_fraction)),
                    len(instances) - n_train)
        test = [instances[i] for i in perm[n_train + n_val :]]
        if not test:
            raise PipelineError("data", "test split is empty; adjust split fractions")
        error = evaluate_stage1(model, test)
        report = [f"stage1 test instances: {len(test)}", f"stage1 test error rate: {error:.6f}"]
    else:
        model = stage2_from_container(expect_type(load_model(out / "stage2.model"), "stage2"))
        pairs, _, _ = _pairs_from_file(out / "gaf.bin")
        result = evaluate_stage2(model, pairs)
        per_bit = ", ".join(f"{e:.6f}" for e in result.per_bit_error)
        report = [
            f"stage2 pairs: {len(pairs)}",
            f"stage2 exact-match error rate: {result.error_rate:.6f}",
            f"stage2 per-step bit error rates: {per_bit}",
        ]
    metrics_path = out / f"metrics-{args.target}.txt"
    metrics_path.write_text("".join(line + "\n" for line in report))
    _write_manifest(
        out, f"eval-{args.target}", cfg,
        inputs={}, outputs={"metrics": metrics_path},
    )
    print("\n".join(report))
    return 0


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="availcast",
        description="Two-stage spatiotemporal service-availability prediction pipeline.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="pipeline config JSON")
        return p

    add("cluster", "discover hotspot regions from the trace file")
    add("featurize", "build labelled training instances from the traces")
    add("train-availability", "train the stage-1 service classifier")
    p = add("predict", "query the stage-1 model at a location/time")
    p.add_argument("--lat", type=float, required=True)
    p.add_argument("--lon", type=float, required=True)
    p.add_argument("--time", required=True, help=f"query time, {TIME_FORMAT}")
    p.add_argument("--top", type=int, default=1, help="how many services to print")
    add("build-series", "binary presence series per (service, cluster)")
    add("encode-gaf", "window the series and render field-image pairs")
    add("train-duration", "train the stage-2 duration forecaster")
    p = add("forecast", "predict the next steps for a service in a cluster")
    p.add_argument("--service", required=True)
    p.add_argument("--cluster", type=int, required=True)
    p.add_argument("--at", required=True, help=f"last observed time, {TIME_FORMAT}")
    p = add("eval", "evaluate a trained stage on held-out data")
    p.add_argument("--target", choices=("stage1", "stage2"), required=True)
    return parser


_HANDLERS = {
    "cluster": lambda cfg, args: _cmd_cluster(cfg),
    "featurize": lambda cfg, args: _cmd_featurize(cfg),
    "train-availability": lambda cfg, args: _cmd_train_availability(cfg),
    "predict": _cmd_predict,
    "build-series": lambda cfg, args: _cmd_build_series(cfg),
    "encode-gaf": lambda cfg, args: _cmd_encode_gaf(cfg),
    "train-duration": lambda cfg, args: _cmd_train_duration(cfg),
    "forecast": _cmd_forecast,
    "eval": _cmd_eval,
}


def run_subcommand(argv) -> int:
    """Run one pipeline step; returns a process exit status.

    Failures print a single machine-parseable `category: detail` line to
    stderr. Unknown subcommands get usage text and a nonzero status from
    argparse.
    """
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_pipeline_config(args.config)
        return _HANDLERS[args.subcommand](cfg, args)
    except PipelineError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
    except ConfigError as exc:
        print(f"config: {exc}", file=sys.stderr)
    except ContainerError as exc:
        print(f"model: {exc}", file=sys.stderr)
    except (IngestError, FeatureError, SeriesError, GeoValidationError) as exc:
        print(f"data: {exc}", file=sys.stderr)
    except FileNotFoundError as exc:
        print(f"io: {exc}", file=sys.stderr)
    except ValueError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
    return 1


def main() -> int:
    return run_subcommand(sys.argv[1:])


if __name__ == "__main__":
    raise SystemExit(main())
