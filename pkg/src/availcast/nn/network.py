"""Sequential network container and the layer-spec description format."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (
    AvgPool2d,
    BatchNorm,
    Concat,
    Conv2d,
    Dense,
    Flatten,
    GlobalAvgPool,
    Layer,
    LeakyReLU,
    MaxPool2d,
    ResidualBlock,
    Softmax,
)


@dataclass(frozen=True)
class LayerSpec:
    """Architecture description of one layer: kind plus its parameters.

    JSON-friendly, so a network can be rebuilt from a saved model
    container before loading its weights.
    """

    kind: str
    args: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "args": dict(self.args)}

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        return cls(kind=d["kind"], args=dict(d.get("args", {})))


_BUILDERS = {
    "dense": lambda a, rng, dt: Dense(a["in_dim"], a["out_dim"], rng, dtype=dt),
    "leaky_relu": lambda a, rng, dt: LeakyReLU(a.get("a", 0.01)),
    "batch_norm": lambda a, rng, dt: BatchNorm(
        a["num_features"], eps=a.get("eps", 1e-5), momentum=a.get("momentum", 0.9), dtype=dt
    ),
    "conv2d": lambda a, rng, dt: Conv2d(
        a["in_ch"], a["out_ch"], a["kh"], a.get("kw"),
        stride=a.get("stride", 1), padding=a.get("padding", 0), rng=rng, dtype=dt,
    ),
    "max_pool": lambda a, rng, dt: MaxPool2d(
        a["window"], stride=a.get("stride"), padding=a.get("padding", 0)
    ),
    "avg_pool": lambda a, rng, dt: AvgPool2d(
        a["window"], stride=a.get("stride"), padding=a.get("padding", 0)
    ),
    "global_avg_pool": lambda a, rng, dt: GlobalAvgPool(),
    "residual_block": lambda a, rng, dt: ResidualBlock(
        a["in_ch"], a["out_ch"], stride=a.get("stride", 1), rng=rng,
        use_batch_norm=a.get("use_batch_norm", True), dtype=dt,
    ),
    "softmax": lambda a, rng, dt: Softmax(),
    "flatten": lambda a, rng, dt: Flatten(),
    "concat": lambda a, rng, dt: Concat(),
}


def build_layer(spec: LayerSpec, rng, dtype=np.float64) -> Layer:
    try:
        builder = _BUILDERS[spec.kind]
    except KeyError:
        raise ValueError(f"unknown layer kind {spec.kind!r}") from None
    return builder(spec.args, rng, dtype)


class Network:
    """Ordered layers with forward / backward / in-place SGD.

    With checked=True every layer boundary is validated for NaN/Inf,
    which is slow but pins down where a computation went bad.
    """

    def __init__(self, layers: list[Layer], checked: bool = False):
        self.layers = layers
        self.checked = checked

    def forward(self, x, training: bool = False):
        for i, layer in enumerate(self.layers):
            x = layer.forward(x, training)
            if self.checked and not np.all(np.isfinite(x)):
                raise FloatingPointError(f"non-finite output of layer {i} ({layer.kind})")
        return x

    def backward(self, grad):
        for i in reversed(range(len(self.layers))):
            grad = self.layers[i].backward(grad)
            if self.checked and not np.all(np.isfinite(grad)):
                raise FloatingPointError(
                    f"non-finite gradient below layer {i} ({self.layers[i].kind})"
                )
        return grad

    def param_items(self):
        out = []
        for i, layer in enumerate(self.layers):
            out.extend(
                (f"layer{i:02d}.{name}", v, g) for name, v, g in layer.param_items()
            )
        return out

    def state_dict(self) -> dict[str, np.ndarray]:
        """All persistent arrays (weights plus running statistics), copied."""
        state = {name: v.copy() for name, v, _ in self.param_items()}
        for i, layer in enumerate(self.layers):
            for name, v in layer.extra_state_items():
                state[f"layer{i:02d}.{name}"] = v.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        live: dict[str, np.ndarray] = {name: v for name, v, _ in self.param_items()}
        for i, layer in enumerate(self.layers):
            for name, v in layer.extra_state_items():
                live[f"layer{i:02d}.{name}"] = v
        missing = set(live) - set(state)
        if missing:
            raise KeyError(f"state dict missing arrays: {sorted(missing)}")
        for name, arr in live.items():
            src = np.asarray(state[name])
            if src.shape != arr.shape:
                raise ValueError(f"{name}: stored shape {src.shape} vs expected {arr.shape}")
            arr[...] = src

    def sgd_step(self, learning_rate: float) -> None:
        for _, v, g in self.param_items():
            v -= learning_rate * g


def build_network(specs: list[LayerSpec], seed: int = 0, dtype=np.float64,
                  checked: bool = False) -> Network:
    """Instantiate a network from layer specs with seeded initialisation."""
    rng = np.random.default_rng(seed)
    return Network([build_layer(s, rng, dtype) for s in specs], checked=checked)
