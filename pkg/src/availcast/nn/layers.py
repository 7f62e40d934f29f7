"""Deterministic neural-network layers with hand-written backward passes.

Everything runs on plain float64 numpy arrays (float32 available for
speed). Each layer caches what its backward pass needs; backward returns
the gradient w.r.t. the layer input and overwrites the parameter
gradients, so one backward call per forward call.
"""

from __future__ import annotations

import math

import numpy as np


class ShapeError(ValueError):
    pass


def _glorot_uniform(rng, shape, fan_in, fan_out, dtype):
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def leaky_relu(x, a: float):
    """Elementwise x for x >= 0, a*x otherwise (0 < a < 1)."""
    if not 0.0 < a < 1.0:
        raise ValueError(f"leak must be in (0, 1), got {a}")
    x = np.asarray(x)
    return np.where(x >= 0, x, a * x)


def dense_forward(x, w, b):
    """y = x @ w + b for x (batch, in), w (in, out), b (out,)."""
    x = np.asarray(x)
    if x.ndim != 2 or x.shape[1] != w.shape[0]:
        raise ShapeError(f"dense input {x.shape} incompatible with weights {w.shape}")
    return x @ w + b


def conv2d_forward(x, w, b, stride: int = 1, padding: int = 0):
    """Cross-correlation of x (N,C,H,W) with filters w (O,C,kh,kw) plus bias.

    Output spatial size is floor((H + 2*padding - kh)/stride) + 1; any
    activation is a separate layer.
    """
    layer = Conv2d.__new__(Conv2d)
    layer.stride, layer.padding = stride, padding
    layer.w, layer.b = np.asarray(w), np.asarray(b)
    layer.in_ch, layer.out_ch = w.shape[1], w.shape[0]
    layer.kh, layer.kw = w.shape[2], w.shape[3]
    layer.dw = np.zeros_like(layer.w)
    layer.db = np.zeros_like(layer.b)
    return layer.forward(np.asarray(x), training=False)


def pool2d(x, window: int, stride: int | None = None, kind: str = "max", padding: int = 0):
    """Per-window max or mean over (N,C,H,W) input."""
    cls = {"max": MaxPool2d, "avg": AvgPool2d}.get(kind)
    if cls is None:
        raise ValueError(f"unknown pool kind {kind!r}")
    return cls(window, stride=stride, padding=padding).forward(np.asarray(x), training=False)


def softmax(x):
    """Row-wise softmax with max-subtraction for stability."""
    x = np.asarray(x)
    z = x - x.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


class Layer:
    kind = "layer"

    def forward(self, x, training: bool):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError

    def param_items(self):
        """Trainable (name, value, grad) triples; arrays are updated in place."""
        return []

    def extra_state_items(self):
        """Non-trainable persistent arrays (e.g. running statistics)."""
        return []


class Dense(Layer):
    kind = "dense"

    def __init__(self, in_dim: int, out_dim: int, rng, dtype=np.float64):
        if in_dim < 1 or out_dim < 1:
            raise ValueError(f"dense dims must be positive, got {in_dim}x{out_dim}")
        self.in_dim, self.out_dim = in_dim, out_dim
        self.w = _glorot_uniform(rng, (in_dim, out_dim), in_dim, out_dim, dtype)
        self.b = np.zeros(out_dim, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x, training):
        self._x = np.asarray(x, dtype=self.w.dtype)
        return dense_forward(self._x, self.w, self.b)

    def backward(self, grad):
        if grad.shape != (self._x.shape[0], self.out_dim):
            raise ShapeError(
                f"dense grad {grad.shape} vs output ({self._x.shape[0]}, {self.out_dim})"
            )
        self.dw[...] = self._x.T @ grad
        self.db[...] = grad.sum(axis=0)
        return grad @ self.w.T

    def param_items(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]


class LeakyReLU(Layer):
    kind = "leaky_relu"

    def __init__(self, a: float = 0.01):
        if not 0.0 < a < 1.0:
            raise ValueError(f"leak must be in (0, 1), got {a}")
        self.a = a

    def forward(self, x, training):
        self._mask = np.asarray(x) >= 0
        return np.where(self._mask, x, self.a * x)

    def backward(self, grad):
        return np.where(self._mask, grad, self.a * grad)


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, training):
        x = np.asarray(x)
        self._mask = x > 0
        return np.maximum(x, 0)

    def backward(self, grad):
        return grad * self._mask


class BatchNorm(Layer):
    """Batch normalisation over the feature axis (2D input) or channel
    axis (4D input). Training mode uses population batch statistics;
    inference uses exponential-moving-average running statistics."""

    kind = "batch_norm"

    def __init__(self, num_features: int, eps: float = 1e-5, momentum: float = 0.9,
                 dtype=np.float64):
        if eps <= 0:
            raise ValueError(f"eps must be positive, got {eps}")
        self.num_features = num_features
        self.eps = eps
        self.momentum = momentum
        self.alpha = np.ones(num_features, dtype=dtype)  # scale
        self.beta = np.zeros(num_features, dtype=dtype)  # shift
        self.dalpha = np.zeros_like(self.alpha)
        self.dbeta = np.zeros_like(self.beta)
        self.running_mean = np.zeros(num_features, dtype=dtype)
        self.running_var = np.ones(num_features, dtype=dtype)

    def _axes_and_shape(self, x):
        if x.ndim == 2:
            return (0,), (1, -1)
        if x.ndim == 4:
            return (0, 2, 3), (1, -1, 1, 1)
        raise ShapeError(f"batch_norm expects 2D or 4D input, got {x.shape}")

    def forward(self, x, training):
        x = np.asarray(x, dtype=self.alpha.dtype)
        if x.shape[0] == 0:
            raise ValueError("batch_norm on an empty batch")
        axes, pshape = self._axes_and_shape(x)
        feat_axis = 1 if x.ndim == 4 else x.ndim - 1
        if x.shape[feat_axis] != self.num_features:
            raise ShapeError(
                f"batch_norm expects {self.num_features} features, got {x.shape}"
            )
        if training:
            mu = x.mean(axis=axes)
            var = x.var(axis=axes)  # population form (divide by N)
            self.running_mean[...] = self.momentum * self.running_mean + (1 - self.momentum) * mu
            self.running_var[...] = self.momentum * self.running_var + (1 - self.momentum) * var
        else:
            mu, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mu.reshape(pshape)) * inv.reshape(pshape)
        self._cache = (xhat, inv, axes, pshape, training)
        return self.alpha.reshape(pshape) * xhat + self.beta.reshape(pshape)

    def backward(self, grad):
        xhat, inv, axes, pshape, training = self._cache
        self.dalpha[...] = (grad * xhat).sum(axis=axes)
        self.dbeta[...] = grad.sum(axis=axes)
        dxhat = grad * self.alpha.reshape(pshape)
        if not training:
            return dxhat * inv.reshape(pshape)
        n = xhat.size // self.num_features
        term = (
            dxhat
            - dxhat.mean(axis=axes, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=axes, keepdims=True)
        )
        return inv.reshape(pshape) * term

    def param_items(self):
        return [("alpha", self.alpha, self.dalpha), ("beta", self.beta, self.dbeta)]

    def extra_state_items(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]


def _out_size(extent: int, kernel: int, stride: int, padding: int) -> int:
    return (extent + 2 * padding - kernel) // stride + 1


def _im2col(xp, kh, kw, stride, ho, wo):
    n, c = xp.shape[:2]
    cols = np.empty((n, c, kh, kw, ho, wo), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride]
    return cols


def _col2im(dcols, xp_shape, stride):
    n, c, kh, kw, ho, wo = dcols.shape
    dxp = np.zeros(xp_shape, dtype=dcols.dtype)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, :, i, j]
    return dxp


class Conv2d(Layer):
    kind = "conv2d"

    def __init__(self, in_ch: int, out_ch: int, kh: int, kw: int | None = None,
                 stride: int = 1, padding: int = 0, rng=None, dtype=np.float64):
        kw = kh if kw is None else kw
        if min(in_ch, out_ch, kh, kw, stride) < 1 or padding < 0:
            raise ValueError("conv2d parameters must be positive (padding >= 0)")
        self.in_ch, self.out_ch = in_ch, out_ch
        self.kh, self.kw = kh, kw
        self.stride, self.padding = stride, padding
        fan_in = in_ch * kh * kw
        fan_out = out_ch * kh * kw
        rng = np.random.default_rng(0) if rng is None else rng
        self.w = _glorot_uniform(rng, (out_ch, in_ch, kh, kw), fan_in, fan_out, dtype)
        self.b = np.zeros(out_ch, dtype=dtype)
        self.dw = np.zeros_like(self.w)
        self.db = np.zeros_like(self.b)

    def forward(self, x, training):
        x = np.asarray(x, dtype=self.w.dtype)
        if x.ndim != 4 or x.shape[1] != self.in_ch:
            raise ShapeError(
                f"conv2d expects (N, {self.in_ch}, H, W), got {x.shape}"
            )
        n, _, h, w_in = x.shape
        ho = _out_size(h, self.kh, self.stride, self.padding)
        wo = _out_size(w_in, self.kw, self.stride, self.padding)
        if ho < 1 or wo < 1:
            raise ShapeError(
                f"conv2d {self.kh}x{self.kw}/s{self.stride} too large for input {h}x{w_in}"
            )
        p = self.padding
        xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p))) if p else x
        cols = _im2col(xp, self.kh, self.kw, self.stride, ho, wo)
        cols2 = cols.reshape(n, self.in_ch * self.kh * self.kw, ho * wo)
        wm = self.w.reshape(self.out_ch, -1)
        out = (wm @ cols2).reshape(n, self.out_ch, ho, wo) + self.b[None, :, None, None]
        self._cache = (cols2, xp.shape, (n, ho, wo))
        return out

    def backward(self, grad):
        cols2, xp_shape, (n, ho, wo) = self._cache
        if grad.shape != (n, self.out_ch, ho, wo):
            raise ShapeError(f"conv2d grad {grad.shape} vs output {(n, self.out_ch, ho, wo)}")
        gm = grad.reshape(n, self.out_ch, ho * wo)
        self.dw[...] = np.einsum("nol,nkl->ok", gm, cols2).reshape(self.w.shape)
        self.db[...] = grad.sum(axis=(0, 2, 3))
        wm = self.w.reshape(self.out_ch, -1)
        dcols = (wm.T @ gm).reshape(n, self.in_ch, self.kh, self.kw, ho, wo)
        dxp = _col2im(dcols, xp_shape, self.stride)
        p = self.padding
        return dxp[:, :, p : xp_shape[2] - p, p : xp_shape[3] - p] if p else dxp

    def param_items(self):
        return [("w", self.w, self.dw), ("b", self.b, self.db)]


class _Pool2d(Layer):
    def __init__(self, window: int, stride: int | None = None, padding: int = 0):
        if window < 1:
            raise ValueError(f"pool window must be >= 1, got {window}")
        self.window = window
        self.stride = window if stride is None else stride
        self.padding = padding

    def _prepare(self, x, fill):
        x = np.asarray(x)
        if x.ndim != 4:
            raise ShapeError(f"pool expects (N, C, H, W), got {x.shape}")
        n, c, h, w = x.shape
        ho = _out_size(h, self.window, self.stride, self.padding)
        wo = _out_size(w, self.window, self.stride, self.padding)
        if ho < 1 or wo < 1:
            raise ShapeError(f"pool window {self.window} does not fit input {h}x{w}")
        p = self.padding
        xp = (
            np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)), constant_values=fill) if p else x
        )
        cols = _im2col(xp, self.window, self.window, self.stride, ho, wo)
        return xp.shape, cols.reshape(n, c, self.window**2, ho, wo)


class MaxPool2d(_Pool2d):
    kind = "max_pool"

    def forward(self, x, training):
        xp_shape, cols = self._prepare(x, -np.inf)
        self._idx = cols.argmax(axis=2)  # ties resolve to the first slot
        self._xp_shape, self._in_shape = xp_shape, np.asarray(x).shape
        return np.take_along_axis(cols, self._idx[:, :, None], axis=2)[:, :, 0]

    def backward(self, grad):
        n, c, _, _ = self._xp_shape
        ho, wo = grad.shape[2], grad.shape[3]
        dcols = np.zeros((n, c, self.window**2, ho, wo), dtype=grad.dtype)
        np.put_along_axis(dcols, self._idx[:, :, None], grad[:, :, None], axis=2)
        dxp = _col2im(
            dcols.reshape(n, c, self.window, self.window, ho, wo), self._xp_shape, self.stride
        )
        p = self.padding
        h, w = self._in_shape[2], self._in_shape[3]
        return dxp[:, :, p : p + h, p : p + w] if p else dxp


class AvgPool2d(_Pool2d):
    kind = "avg_pool"

    def forward(self, x, training):
        self._xp_shape, cols = self._prepare(x, 0.0)
        self._in_shape = np.asarray(x).shape
        return cols.mean(axis=2)

    def backward(self, grad):
        n, c, _, _ = self._xp_shape
        ho, wo = grad.shape[2], grad.shape[3]
        share = grad[:, :, None] / self.window**2
        dcols = np.broadcast_to(share, (n, c, self.window**2, ho, wo))
        dxp = _col2im(
            dcols.reshape(n, c, self.window, self.window, ho, wo), self._xp_shape, self.stride
        )
        p = self.padding
        h, w = self._in_shape[2], self._in_shape[3]
        return dxp[:, :, p : p + h, p : p + w] if p else dxp


class GlobalAvgPool(Layer):
    """Mean over the spatial dims: (N, C, H, W) -> (N, C)."""

    kind = "global_avg_pool"

    def forward(self, x, training):
        x = np.asarray(x)
        if x.ndim != 4:
            raise ShapeError(f"global_avg_pool expects 4D input, got {x.shape}")
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, grad):
        n, c, h, w = self._shape
        return np.broadcast_to(grad[:, :, None, None] / (h * w), self._shape).copy()


class Flatten(Layer):
    kind = "flatten"

    def forward(self, x, training):
        x = np.asarray(x)
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, grad):
        return grad.reshape(self._shape)


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, training):
        self._p = softmax(x)
        return self._p

    def backward(self, grad):
        p = self._p
        return p * (grad - (grad * p).sum(axis=-1, keepdims=True))


class Concat(Layer):
    """Concatenate a list of (batch, features) blocks along axis 1."""

    kind = "concat"

    def forward(self, xs, training):
        self._widths = [x.shape[1] for x in xs]
        return np.concatenate(xs, axis=1)

    def backward(self, grad):
        return np.split(grad, np.cumsum(self._widths)[:-1], axis=1)


class ResidualBlock(Layer):
    """conv-BN-ReLU-conv-BN plus a skip, then ReLU.

    The skip is the identity unless channels or stride change, in which
    case a 1x1 projection convolution (with BN when enabled) matches the
    shapes.
    """

    kind = "residual_block"

    def __init__(self, in_ch: int, out_ch: int, stride: int = 1, rng=None,
                 use_batch_norm: bool = True, dtype=np.float64):
        rng = np.random.default_rng(0) if rng is None else rng
        self.use_batch_norm = use_batch_norm
        self.conv1 = Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, rng=rng, dtype=dtype)
        self.conv2 = Conv2d(out_ch, out_ch, 3, stride=1, padding=1, rng=rng, dtype=dtype)
        self.bn1 = BatchNorm(out_ch, dtype=dtype) if use_batch_norm else None
        self.bn2 = BatchNorm(out_ch, dtype=dtype) if use_batch_norm else None
        self.relu_inner = ReLU()
        if stride != 1 or in_ch != out_ch:
            self.proj = Conv2d(in_ch, out_ch, 1, stride=stride, padding=0, rng=rng, dtype=dtype)
            self.bn_proj = BatchNorm(out_ch, dtype=dtype) if use_batch_norm else None
        else:
            self.proj = None
            self.bn_proj = None

    def _children(self):
        items = [("conv1", self.conv1), ("bn1", self.bn1), ("conv2", self.conv2),
                 ("bn2", self.bn2), ("proj", self.proj), ("bn_proj", self.bn_proj)]
        return [(name, child) for name, child in items if child is not None]

    def forward(self, x, training):
        h = self.conv1.forward(x, training)
        if self.bn1 is not None:
            h = self.bn1.forward(h, training)
        h = self.relu_inner.forward(h, training)
        h = self.conv2.forward(h, training)
        if self.bn2 is not None:
            h = self.bn2.forward(h, training)
        if self.proj is not None:
            s = self.proj.forward(x, training)
            if self.bn_proj is not None:
                s = self.bn_proj.forward(s, training)
        else:
            s = x
        if h.shape != s.shape:
            raise ShapeError(f"residual branches disagree: {h.shape} vs {s.shape}")
        pre = h + s
        self._mask = pre > 0
        return np.maximum(pre, 0)

    def backward(self, grad):
        gpre = grad * self._mask
        g = gpre
        if self.bn2 is not None:
            g = self.bn2.backward(g)
        g = self.conv2.backward(g)
        g = self.relu_inner.backward(g)
        if self.bn1 is not None:
            g = self.bn1.backward(g)
        dx = self.conv1.backward(g)
        if self.proj is not None:
            gs = gpre
            if self.bn_proj is not None:
                gs = self.bn_proj.backward(gs)
            dx = dx + self.proj.backward(gs)
        else:
            dx = dx + gpre
        return dx

    def param_items(self):
        out = []
        for name, child in self._children():
            out.extend((f"{name}.{p}", v, g) for p, v, g in child.param_items())
        return out

    def extra_state_items(self):
        out = []
        for name, child in self._children():
            out.extend((f"{name}.{p}", v) for p, v in child.extra_state_items())
        return out
