"""Conversions between in-memory models and the binary container format,
plus the instances CSV used between the featurize and training steps."""

from __future__ import annotations

import csv
from dataclasses import asdict

import numpy as np

from .availability import Stage1Config, Stage1Model
from .containers import ModelContainer
from .duration import Stage2Config, Stage2Model, build_dual_model
from .features import EncodingConfig, FeatureVector, TrainingInstance
from .geo import ClusterModel, GeoPoint
from .nn import LayerSpec, SchedulerConfig, build_network

_DTYPES = {"float64": np.float64, "float32": np.float32}


def cluster_to_container(model: ClusterModel, meta: dict | None = None) -> ModelContainer:
    return ModelContainer(
        artifact_type="cluster",
        config={"earth_radius_km": model.earth_radius_km, **(meta or {})},
        tensors={"centroids": model.centroid_array()},
    )


def cluster_from_container(container: ModelContainer) -> ClusterModel:
    cents = container.tensors["centroids"]
    return ClusterModel(
        centroids=[GeoPoint(float(lat), float(lon)) for lat, lon in cents],
        earth_radius_km=float(container.config["earth_radius_km"]),
    )


def _stage1_config_dict(cfg: Stage1Config) -> dict:
    d = asdict(cfg)
    d["hidden"] = [list(h) for h in cfg.hidden]
    return d


def _stage1_config_from_dict(d: dict) -> Stage1Config:
    d = dict(d)
    d["hidden"] = tuple(tuple(h) for h in d["hidden"])
    return Stage1Config(**d)


def stage1_to_container(model: Stage1Model) -> ModelContainer:
    tensors = {f"net.{k}": v for k, v in model.network.state_dict().items()}
    tensors["centroids"] = model.cluster_model.centroid_array()
    return ModelContainer(
        artifact_type="stage1",
        config={
            "stage1_config": _stage1_config_dict(model.config),
            "encoding": model.encoding.to_dict(),
            "specs": [s.to_dict() for s in model.specs],
            "earth_radius_km": model.cluster_model.earth_radius_km,
        },
        tensors=tensors,
        vocabulary=list(model.vocabulary),
    )


def stage1_from_container(container: ModelContainer) -> Stage1Model:
    cfg = _stage1_config_from_dict(container.config["stage1_config"])
    encoding = EncodingConfig.from_dict(container.config["encoding"])
    specs = [LayerSpec.from_dict(d) for d in container.config["specs"]]
    network = build_network(specs, seed=cfg.seed, dtype=_DTYPES[cfg.dtype])
    network.load_state_dict(
        {k[len("net."):]: v for k, v in container.tensors.items() if k.startswith("net.")}
    )
    cluster_model = ClusterModel(
        centroids=[
            GeoPoint(float(lat), float(lon)) for lat, lon in container.tensors["centroids"]
        ],
        earth_radius_km=float(container.config["earth_radius_km"]),
    )
    return Stage1Model(
        network=network,
        specs=specs,
        encoding=encoding,
        cluster_model=cluster_model,
        vocabulary=list(container.vocabulary or []),
        config=cfg,
    )


def _stage2_config_dict(cfg: Stage2Config) -> dict:
    d = asdict(cfg)
    d["channels"] = list(cfg.channels)
    d["scheduler"] = asdict(cfg.scheduler)
    return d


def _stage2_config_from_dict(d: dict) -> Stage2Config:
    d = dict(d)
    d["channels"] = tuple(d["channels"])
    d["scheduler"] = SchedulerConfig(**d["scheduler"])
    return Stage2Config(**d)


def stage2_to_container(model: Stage2Model) -> ModelContainer:
    return ModelContainer(
        artifact_type="stage2",
        config={"stage2_config": _stage2_config_dict(model.config)},
        tensors=model.state_dict(),
    )


def stage2_from_container(container: ModelContainer) -> Stage2Model:
    cfg = _stage2_config_from_dict(container.config["stage2_config"])
    model = build_dual_model(cfg)
    model.load_state_dict(container.tensors)
    return model


_INSTANCE_FIELDS = [
    "service_id", "label", "cluster_id", "lat", "lon", "time_of_day",
    "day_of_week", "is_weekday", "is_holiday", "month",
]


def save_instances_csv(path, instances, vocabulary) -> None:
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(_INSTANCE_FIELDS)
        for inst in instances:
            fv = inst.features
            writer.writerow(
                [
                    vocabulary[inst.label], inst.label, inst.cluster_id,
                    repr(fv.lat), repr(fv.lon), repr(fv.time_of_day),
                    fv.day_of_week, fv.is_weekday, fv.is_holiday, fv.month,
                ]
            )


def load_instances_csv(path) -> list[TrainingInstance]:
    out = []
    with open(path, newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != _INSTANCE_FIELDS:
            raise ValueError(f"{path}: unexpected instance columns {reader.fieldnames}")
        for row in reader:
            fv = FeatureVector(
                lat=float(row["lat"]),
                lon=float(row["lon"]),
                time_of_day=float(row["time_of_day"]),
                day_of_week=int(row["day_of_week"]),
                is_weekday=int(row["is_weekday"]),
                is_holiday=int(row["is_holiday"]),
                month=int(row["month"]),
            )
            out.append(
                TrainingInstance(fv, int(row["cluster_id"]), int(row["label"]))
            )
    return out
