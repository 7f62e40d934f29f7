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
    ReLU,
    ResidualBlock,
    ShapeError,
    Softmax,
    conv2d_forward,
    dense_forward,
    leaky_relu,
    pool2d,
    softmax,
)
from .losses import (
    LOSSES,
    cross_entropy_grad,
    cross_entropy_loss,
    mse_grad,
    mse_loss,
    one_hot,
)
from .network import LayerSpec, Network, build_layer, build_network
from .optim import SchedulerConfig, scheduler_rate, sgd_step
from .gradcheck import grad_check, grad_check_params, numeric_jacobian

__all__ = [
    "AvgPool2d", "BatchNorm", "Concat", "Conv2d", "Dense", "Flatten",
    "GlobalAvgPool", "Layer", "LeakyReLU", "MaxPool2d", "ReLU",
    "ResidualBlock", "ShapeError", "Softmax", "conv2d_forward",
    "dense_forward", "leaky_relu", "pool2d", "softmax", "LOSSES",
    "cross_entropy_grad", "cross_entropy_loss", "mse_grad", "mse_loss",
    "one_hot", "LayerSpec", "Network", "build_layer", "build_network",
    "SchedulerConfig", "scheduler_rate", "sgd_step", "grad_check",
    "grad_check_params", "numeric_jacobian",
]
