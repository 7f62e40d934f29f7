"""Stage 2: how long a service stays available.

Two residual convolutional pathways (one per field image) are fused by
concatenation into a 2**horizon-way classifier over the multi-step
presence label. Channel counts scale by a width factor so the full
architecture shrinks to desk size without changing its shape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .gaf import GafImagePair, balance_classes, decode_label
from .nn import (
    Concat,
    LayerSpec,
    Network,
    SchedulerConfig,
    build_network,
    cross_entropy_grad,
    cross_entropy_loss,
    one_hot,
    scheduler_rate,
)

_DTYPES = {"float64": np.float64, "float32": np.float32}


@dataclass(frozen=True)
class Stage2Config:
    horizon: int = 3  # steps ahead; 2**horizon output classes
    input_size: int = 32
    channels: tuple = (64, 128, 256, 512)
    width_factor: float = 1.0
    scheduler: SchedulerConfig = SchedulerConfig(0.1, 0.5, 10)
    batch_size: int = 16
    max_epochs: int = 50
    patience: int = 10
    val_fraction: float = 0.1
    seed: int = 0
    balance: bool = True
    rotation_deg: float = 40.0
    shear_factor: float = 0.2
    use_batch_norm: bool = True
    head_leak: float = 0.01
    dtype: str = "float64"
    max_horizon: int = 3

    def __post_init__(self):
        if not 1 <= self.horizon <= self.max_horizon:
            raise ValueError(
                f"horizon {self.horizon} outside [1, {self.max_horizon}];"
                " raise max_horizon to go further out"
            )
        if not self.channels or any(c < 1 for c in self.channels):
            raise ValueError(f"bad channel schedule {self.channels}")
        if self.width_factor <= 0:
            raise ValueError("width_factor must be positive")
        if self.input_size < 1 or self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("input_size, batch_size and max_epochs must be >= 1")

    @property
    def n_classes(self) -> int:
        return 2**self.horizon

    def scaled_channels(self) -> list[int]:
        return [max(1, round(c * self.width_factor)) for c in self.channels]


def _min_input_size(n_stages: int) -> int:
    # stem conv + stem pool + one stride-2 transition per stage after the
    # first; each halving needs spatial extent >= 2 going in
    halvings = 2 + (n_stages - 1)
    return 2 ** (halvings - 1) + 1


def build_pathway(cfg: Stage2Config) -> list[LayerSpec]:
    """One image pathway: 7x7/2 stem, 3x3/2 max pool, two residual blocks
    per channel stage (spatial halved at each stage after the first),
    global average pool. Output length equals the last channel count."""
    t = cfg.input_size
    chans = cfg.scaled_channels()
    if t < _min_input_size(len(chans)):
        raise ValueError(
            f"input size {t} too small for {len(chans)} stages;"
            f" minimum is {_min_input_size(len(chans))}"
        )
    specs = [
        LayerSpec("conv2d", {"in_ch": 1, "out_ch": chans[0], "kh": 7, "stride": 2, "padding": 3}),
    ]
    if cfg.use_batch_norm:
        specs.append(LayerSpec("batch_norm", {"num_features": chans[0]}))
    specs.append(LayerSpec("leaky_relu", {"a": cfg.head_leak}))
    specs.append(LayerSpec("max_pool", {"window": 3, "stride": 2, "padding": 1}))
    prev = chans[0]
    for stage, ch in enumerate(chans):
        stride = 1 if stage == 0 else 2
        specs.append(
            LayerSpec(
                "residual_block",
                {"in_ch": prev, "out_ch": ch, "stride": stride,
                 "use_batch_norm": cfg.use_batch_norm},
            )
        )
        specs.append(
            LayerSpec(
                "residual_block",
                {"in_ch": ch, "out_ch": ch, "stride": 1,
                 "use_batch_norm": cfg.use_batch_norm},
            )
        )
        prev = ch
    specs.append(LayerSpec("global_avg_pool", {}))
    return specs


def build_head(cfg: Stage2Config) -> list[LayerSpec]:
    width = 2 * cfg.scaled_channels()[-1]
    return [
        LayerSpec("dense", {"in_dim": width, "out_dim": cfg.n_classes}),
        LayerSpec("leaky_relu", {"a": cfg.head_leak}),
        LayerSpec("softmax", {}),
    ]


@dataclass
class Stage2EpochRecord:
    epoch: int
    learning_rate: float
    train_loss: float
    val_loss: float
    val_error: float


@dataclass
class Stage2Model:
    """Two pathways with identical architecture but independent weights,
    fused by concatenation into the classification head."""

    path_sum: Network  # consumes the summation-field image
    path_diff: Network  # consumes the difference-field image
    head: Network
    config: Stage2Config
    pathway_specs: list[LayerSpec] = field(default_factory=list, repr=False)
    head_specs: list[LayerSpec] = field(default_factory=list, repr=False)
    history: list[Stage2EpochRecord] = field(default_factory=list, repr=False)

    def __post_init__(self):
        self._fuse = Concat()

    def forward(self, x_sum, x_diff, training: bool = False) -> np.ndarray:
        v1 = self.path_sum.forward(x_sum, training)
        v2 = self.path_diff.forward(x_diff, training)
        return self.head.forward(self._fuse.forward([v1, v2], training), training)

    def backward(self, grad) -> None:
        g1, g2 = self._fuse.backward(self.head.backward(grad))
        self.path_sum.backward(g1)
        self.path_diff.backward(g2)

    def sgd_step(self, learning_rate: float) -> None:
        for net in (self.path_sum, self.path_diff, self.head):
            net.sgd_step(learning_rate)

    def param_items(self):
        out = []
        for prefix, net in (("gasf", self.path_sum), ("gadf", self.path_diff),
                            ("head", self.head)):
            out.extend((f"{prefix}.{n}", v, g) for n, v, g in net.param_items())
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {}
        for prefix, net in (("gasf", self.path_sum), ("gadf", self.path_diff),
                            ("head", self.head)):
            state.update({f"{prefix}.{k}": v for k, v in net.state_dict().items()})
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for prefix, net in (("gasf", self.path_sum), ("gadf", self.path_diff),
                            ("head", self.head)):
            sub = {k[len(prefix) + 1:]: v for k, v in state.items()
                   if k.startswith(prefix + ".")}
            net.load_state_dict(sub)


def build_dual_model(cfg: Stage2Config) -> Stage2Model:
    dtype = _DTYPES[cfg.dtype]
    pathway_specs = build_pathway(cfg)
    head_specs = build_head(cfg)
    return Stage2Model(
        path_sum=build_network(pathway_specs, seed=cfg.seed, dtype=dtype),
        path_diff=build_network(pathway_specs, seed=cfg.seed + 1, dtype=dtype),
        head=build_network(head_specs, seed=cfg.seed + 2, dtype=dtype),
        config=cfg,
        pathway_specs=pathway_specs,
        head_specs=head_specs,
    )


def _pairs_to_arrays(pairs, t: int, dtype):
    xs = np.empty((len(pairs), 1, t, t), dtype=dtype)
    xd = np.empty((len(pairs), 1, t, t), dtype=dtype)
    y = np.empty(len(pairs), dtype=np.int64)
    for i, (pair, label) in enumerate(pairs):
        if pair.size != t:
            raise ValueError(f"image size {pair.size} does not match configured {t}")
        xs[i, 0] = pair.gasf
        xd[i, 0] = pair.gadf
        y[i] = label.class_index
    return xs, xd, y


def train_stage2(pairs, cfg: Stage2Config) -> Stage2Model:
    """SGD with the step-decay schedule over cross-entropy on the fused
    classifier. Minority classes in the training split are oversampled via
    image augmentation when cfg.balance is set. Deterministic given the
    seed."""
    if not pairs:
        raise ValueError("no training pairs")
    dtype = _DTYPES[cfg.dtype]
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(len(pairs))
    n_val = int(round(len(pairs) * cfg.val_fraction))
    val_pairs = [pairs[i] for i in perm[:n_val]]
    train_pairs = [pairs[i] for i in perm[n_val:]]

    if cfg.balance:
        train_pairs = balance_classes(
            train_pairs,
            seed=cfg.seed,
            rotation_deg=cfg.rotation_deg,
            shear_factor=cfg.shear_factor,
        )
    if len({label.class_index for _, label in train_pairs}) < 2:
        raise ValueError("training needs at least 2 classes present after balancing")

    model = build_dual_model(cfg)
    xs, xd, y = _pairs_to_arrays(train_pairs, cfg.input_size, dtype)
    y_hot = one_hot(y, cfg.n_classes, dtype=dtype)
    if n_val:
        vxs, vxd, vy = _pairs_to_arrays(val_pairs, cfg.input_size, dtype)
        vy_hot = one_hot(vy, cfg.n_classes, dtype=dtype)

    best_val = np.inf
    strikes = 0
    for epoch in range(cfg.max_epochs):
        lr = scheduler_rate(cfg.scheduler, epoch)
        order = rng.permutation(len(y))
        total = 0.0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            probs = model.forward(xs[idx], xd[idx], training=True)
            total += cross_entropy_loss(probs, y_hot[idx]) * len(idx)
            model.backward(cross_entropy_grad(probs, y_hot[idx]))
            model.sgd_step(lr)
        train_loss = total / len(order)
        if n_val:
            vprobs = model.forward(vxs, vxd, training=False)
            val_loss = cross_entropy_loss(vprobs, vy_hot)
            val_error = float(np.mean(vprobs.argmax(axis=1) != vy))
        else:
            val_loss, val_error = train_loss, np.nan
        model.history.append(Stage2EpochRecord(epoch, lr, train_loss, val_loss, val_error))
        if n_val:
            if best_val - val_loss < 1e-12:
                strikes += 1
                if strikes >= cfg.patience:
                    break
            else:
                strikes = 0
            best_val = min(best_val, val_loss)
    return model


def forecast(model: Stage2Model, pair: GafImagePair):
    """Decode the argmax class into presence bits; ties pick the smallest
    class index. Returns (label, class probabilities)."""
    t = model.config.input_size
    if pair.size != t:
        raise ValueError(f"image size {pair.size} does not match configured {t}")
    dtype = _DTYPES[model.config.dtype]
    probs = model.forward(
        pair.gasf[None, None].astype(dtype), pair.gadf[None, None].astype(dtype),
        training=False,
    )[0]
    cls = int(probs.argmax())
    return decode_label(cls, model.config.horizon), probs


@dataclass
class Stage2Evaluation:
    error_rate: float  # exact match over all bits
    per_bit_error: np.ndarray


def evaluate_stage2(model: Stage2Model, pairs) -> Stage2Evaluation:
    """Exact-class error rate plus the per-step bit error rates."""
    if not pairs:
        raise ValueError("empty evaluation set")
    dtype = _DTYPES[model.config.dtype]
    xs, xd, y = _pairs_to_arrays(pairs, model.config.input_size, dtype)
    probs = model.forward(xs, xd, training=False)
    pred = probs.argmax(axis=1)
    horizon = model.config.horizon
    true_bits = (y[:, None] >> np.arange(horizon)) & 1
    pred_bits = (pred[:, None] >> np.arange(horizon)) & 1
    return Stage2Evaluation(
        error_rate=float(np.mean(pred != y)),
        per_bit_error=np.mean(pred_bits != true_bits, axis=0),
    )
