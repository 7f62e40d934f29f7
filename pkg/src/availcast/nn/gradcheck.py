"""Finite-difference verification of analytic gradients."""

from __future__ import annotations

import numpy as np

from .losses import LOSSES


def _relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)


def grad_check_params(param_items, loss_fn, h: float = 1e-5) -> float:
    """Worst relative error between stored gradients and central differences.

    param_items: (name, value, grad) triples whose grad entries were filled
    by an analytic backward pass. loss_fn() must recompute the scalar loss
    from the live parameter arrays. Use float64 parameters; h=1e-5 is the
    sweet spot there.
    """
    worst = 0.0
    for _, value, grad in param_items:
        flat_v = value.reshape(-1)
        flat_g = grad.reshape(-1).copy()
        for i in range(flat_v.size):
            orig = flat_v[i]
            flat_v[i] = orig + h
            lp = loss_fn()
            flat_v[i] = orig - h
            lm = loss_fn()
            flat_v[i] = orig
            numeric = (lp - lm) / (2.0 * h)
            worst = max(worst, _relative_error(float(flat_g[i]), numeric))
    return worst


def grad_check(network, x, targets, loss: str = "mse", h: float = 1e-5,
               training: bool = True) -> float:
    """Gradient check of every parameter of a sequential network."""
    loss_fn, loss_grad = LOSSES[loss]
    out = network.forward(x, training=training)
    network.backward(loss_grad(out, targets))
    return grad_check_params(
        network.param_items(),
        lambda: loss_fn(network.forward(x, training=training), targets),
        h=h,
    )


def numeric_jacobian(fn, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of fn at x, shaped (out_size, in_size)."""
    x = np.asarray(x, dtype=float)
    base = np.asarray(fn(x)).reshape(-1)
    jac = np.zeros((base.size, x.size))
    flat = x.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        plus = np.asarray(fn(x)).reshape(-1)
        flat[i] = orig - h
        minus = np.asarray(fn(x)).reshape(-1)
        flat[i] = orig
        jac[:, i] = (plus - minus) / (2.0 * h)
    return jac
