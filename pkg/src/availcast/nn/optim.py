"""Plain SGD and the step-decay learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class SchedulerConfig:
    """Step decay: rate = alpha0 * delta ** floor(epoch / drop)."""

    alpha0: float
    delta: float
    drop: int

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError(f"alpha0 must be positive, got {self.alpha0}")
        if not 0.0 < self.delta <= 1.0:
            raise ValueError(f"delta must be in (0, 1], got {self.delta}")
        if self.drop < 1 or int(self.drop) != self.drop:
            raise ValueError(f"drop must be a positive integer, got {self.drop}")


def scheduler_rate(cfg: SchedulerConfig, epoch: int) -> float:
    """Learning rate for an epoch, computed statelessly from epoch 0."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    return cfg.alpha0 * cfg.delta ** (epoch // cfg.drop)


def sgd_step(params: dict, grads: dict, learning_rate: float) -> dict:
    """theta <- theta - lr * grad, elementwise and in place; returns params."""
    for name, value in params.items():
        value -= learning_rate * grads[name]
    return params
