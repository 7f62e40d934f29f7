"""Stage 1: which service is available at a location and time.

A feedforward classifier over the encoded (location, time, cluster)
features, trained with cross-entropy and plain SGD, early-stopped on the
validation loss.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

import numpy as np

from .features import (
    EncodingConfig,
    TrainingInstance,
    encode_input,
    encode_instances,
    features_from_point_time,
)
from .geo import ClusterModel, GeoPoint, assign_cluster
from .nn import (
    LayerSpec,
    Network,
    build_network,
    cross_entropy_grad,
    cross_entropy_loss,
    one_hot,
)

_DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class Stage1Config:
    """Hidden blocks as (width, leak) pairs; one batch-norm per block."""

    hidden: tuple = ((16, 0.01), (16, 0.01), (8, 0.01))
    batch_size: int = 32
    learning_rate: float = 0.01
    stop_tol: float = 1e-4
    patience: int = 5
    max_epochs: int = 200
    seed: int = 0
    train_fraction: float = 0.72
    val_fraction: float = 0.08
    test_fraction: float = 0.20
    normalize_latlon: bool = True
    include_month: bool = False
    dtype: str = "float64"

    def __post_init__(self):
        total = self.train_fraction + self.val_fraction + self.test_fraction
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"split fractions must sum to 1, got {total}")
        if any(w < 1 for w, _ in self.hidden):
            raise ValueError(f"hidden widths must be positive: {self.hidden}")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 1:
            raise ValueError("batch_size, max_epochs and patience must be >= 1")


def build_stage1_network(cfg: Stage1Config, in_dim: int, n_services: int) -> list[LayerSpec]:
    """dense -> leaky_relu -> batch_norm per hidden block, then an
    n_services-way softmax head."""
    if n_services < 2:
        raise ValueError(f"need at least 2 services, got {n_services}")
    if in_dim < 1:
        raise ValueError(f"input width must be positive, got {in_dim}")
    specs: list[LayerSpec] = []
    prev = in_dim
    for width, leak in cfg.hidden:
        specs.append(LayerSpec("dense", {"in_dim": prev, "out_dim": int(width)}))
        specs.append(LayerSpec("leaky_relu", {"a": float(leak)}))
        specs.append(LayerSpec("batch_norm", {"num_features": int(width)}))
        prev = int(width)
    specs.append(LayerSpec("dense", {"in_dim": prev, "out_dim": n_services}))
    specs.append(LayerSpec("softmax", {}))
    return specs


@dataclass
class EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float
    val_error: float


@dataclass
class Stage1Model:
    network: Network
    specs: list[LayerSpec]
    encoding: EncodingConfig
    cluster_model: ClusterModel
    vocabulary: list[str]
    config: Stage1Config
    history: list[EpochRecord] = field(default_factory=list, repr=False)
    split_indices: dict = field(default_factory=dict, repr=False)

    @property
    def n_services(self) -> int:
        return len(self.vocabulary)


def split_indices(n: int, cfg: Stage1Config) -> dict[str, np.ndarray]:
    """The seeded train/val/test permutation cut train_stage1 uses; callers
    evaluating a stored model recover the same test subset from it."""
    perm = np.random.default_rng(cfg.seed).permutation(n)
    n_train = min(int(round(n * cfg.train_fraction)), n)
    n_val = min(int(round(n * cfg.val_fraction)), n - n_train)
    return {
        "train": perm[:n_train],
        "val": perm[n_train : n_train + n_val],
        "test": perm[n_train + n_val :],
    }


def _epoch_pass(network, x, y_hot, batch_size, lr, order):
    total = 0.0
    for lo in range(0, len(order), batch_size):
        idx = order[lo : lo + batch_size]
        probs = network.forward(x[idx], training=True)
        total += cross_entropy_loss(probs, y_hot[idx]) * len(idx)
        network.backward(cross_entropy_grad(probs, y_hot[idx]))
        network.sgd_step(lr)
    return total / len(order)


def _eval_loss_error(network, x, y_hot, y):
    probs = network.forward(x, training=False)
    loss = cross_entropy_loss(probs, y_hot)
    error = float(np.mean(probs.argmax(axis=1) != y))
    return loss, error


def train_stage1(
    instances: list[TrainingInstance],
    cfg: Stage1Config,
    cluster_model: ClusterModel,
    vocabulary: list[str],
) -> Stage1Model:
    """Train until the validation-loss decrease stays below stop_tol for
    `patience` consecutive epochs, or max_epochs. Deterministic given the
    seed. The trained model keeps its per-epoch history and the shuffled
    train/val/test index split."""
    if len(set(inst.label for inst in instances)) < 2:
        raise ValueError("training needs at least 2 distinct service labels")
    dtype = _DTYPES[cfg.dtype]
    rng = np.random.default_rng(cfg.seed)
    rng.permutation(len(instances))  # keep the rng stream aligned with split_indices
    split = split_indices(len(instances), cfg)
    idx_train, idx_val, idx_test = split["train"], split["val"], split["test"]
    if len(idx_train) == 0:
        raise ValueError("empty training split")

    encoding = EncodingConfig.fit(
        [instances[i] for i in idx_train],
        cluster_model.k,
        normalize_latlon=cfg.normalize_latlon,
        include_month=cfg.include_month,
    )
    x_all, y_all = encode_instances(instances, encoding)
    x_all = x_all.astype(dtype)
    n_services = len(vocabulary)
    y_hot = one_hot(y_all, n_services, dtype=dtype)

    specs = build_stage1_network(cfg, encoding.length, n_services)
    network = build_network(specs, seed=cfg.seed, dtype=dtype)

    xt, yt_hot = x_all[idx_train], y_hot[idx_train]
    xv, yv_hot, yv = x_all[idx_val], y_hot[idx_val], y_all[idx_val]

    history: list[EpochRecord] = []
    # the untrained network's validation loss is the baseline the first
    # epoch's decrease is measured against
    best_val = _eval_loss_error(network, xv, yv_hot, yv)[0] if len(idx_val) else np.inf
    strikes = 0
    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(idx_train))
        train_loss = _epoch_pass(network, xt, yt_hot, cfg.batch_size, cfg.learning_rate, order)
        if len(idx_val):
            val_loss, val_error = _eval_loss_error(network, xv, yv_hot, yv)
        else:
            val_loss, val_error = train_loss, np.nan
        history.append(EpochRecord(epoch, cfg.learning_rate, train_loss, val_loss, val_error))
        if len(idx_val):
            if best_val - val_loss < cfg.stop_tol:
                strikes += 1
                if strikes >= cfg.patience:
                    break
            else:
                strikes = 0
            best_val = min(best_val, val_loss)

    return Stage1Model(
        network=network,
        specs=specs,
        encoding=encoding,
        cluster_model=cluster_model,
        vocabulary=list(vocabulary),
        config=cfg,
        history=history,
        split_indices={"train": idx_train, "val": idx_val, "test": idx_test},
    )


def predict_availability(model: Stage1Model, point: GeoPoint, timestamp: datetime, cal):
    """Full distribution over services at (point, timestamp), sorted by
    descending probability (ties by vocabulary order)."""
    fv = features_from_point_time(point, timestamp, cal)
    cid = assign_cluster(model.cluster_model, point)
    x = encode_input(fv, cid, model.encoding)[None, :]
    probs = model.network.forward(x, training=False)[0]
    order = np.lexsort((np.arange(len(probs)), -probs))
    return [(model.vocabulary[i], float(probs[i])) for i in order]


def available_services(model: Stage1Model, point: GeoPoint, timestamp: datetime, cal,
                       threshold: float | None = None):
    """Set-valued answer: services whose probability clears the threshold
    (default 0.5 / n_services)."""
    thr = 0.5 / model.n_services if threshold is None else threshold
    return [(sid, p) for sid, p in predict_availability(model, point, timestamp, cal) if p >= thr]


def evaluate_stage1(model: Stage1Model, instances: list[TrainingInstance]) -> float:
    """Fraction of instances whose argmax prediction misses the label."""
    if not instances:
        raise ValueError("empty evaluation set")
    x, y = encode_instances(instances, model.encoding)
    probs = model.network.forward(x.astype(model.network.layers[0].w.dtype), training=False)
    return float(np.mean(probs.argmax(axis=1) != y))
