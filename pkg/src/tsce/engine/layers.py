"""Forward/backward passes for every layer kind used by the six networks.

Conventions:

* tensors are float64 numpy arrays, shaped ``(batch, channels, time)`` for
  convolutional stages and ``(batch, features)`` after pooling/flattening;
* "convolution" means cross-correlation (no kernel flip), stride 1;
* same-padding splits the deficit left/right with the extra cell on the
  right;
* ``forward`` returns ``(output, cache)`` and ``backward(cache, grad_out)``
  returns ``(grad_input, grads)`` where ``grads`` maps parameter names to
  gradients.  A cache can only be consumed by the layer that produced it
  (anything else raises ``StateError``).

Only ``conv1d`` and ``dense`` consume the init RNG stream, in construction
order; ``dropout`` consumes the run RNG at train-time forward.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DomainError, ShapeError, StateError
from .init import glorot_uniform

__all__ = [
    "Layer", "Conv1D", "BatchNorm", "Dense", "ReLU", "Sigmoid", "PReLU",
    "Dropout", "MaxPool", "AvgPool", "GlobalAvgPool", "Softmax", "Add",
    "AttentionFuse", "Concat", "LAYER_KINDS",
]

LAYER_KINDS = (
    "conv1d", "batch_norm", "dense", "relu", "sigmoid", "prelu", "dropout",
    "max_pool", "avg_pool", "global_avg_pool", "softmax", "add",
    "attention_fuse", "concat",
)


class Layer:
    """Base layer: parameter dict plus forward/backward contract."""

    kind: str = "?"
    n_inputs: int = 1

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.state: dict[str, np.ndarray] = {}  # non-trainable (BN running stats)
        self.hyper: dict = {}

    # canonical parameter / state order for checkpoints
    def param_names(self) -> tuple[str, ...]:
        return tuple(self.params)

    def state_names(self) -> tuple[str, ...]:
        return tuple(self.state)

    def forward(self, x, mode="train", rng=None):
        raise NotImplementedError

    def backward(self, cache, grad_out):
        raise NotImplementedError

    def _cache(self, **payload) -> dict:
        payload["__layer__"] = self
        return payload

    def _check_cache(self, cache) -> dict:
        if not isinstance(cache, dict) or cache.get("__layer__") is not self:
            raise StateError(f"{self.kind}: cache does not belong to this layer")
        return cache

    def __repr__(self):
        hyper = ", ".join(f"{k}={v}" for k, v in self.hyper.items())
        return f"{type(self).__name__}({hyper})"


def _require_3d(x, kind):
    if x.ndim != 3:
        raise ShapeError(f"{kind}: expected (batch, channels, time), got shape {x.shape}")


class Conv1D(Layer):
    """Stride-1 1D cross-correlation with 'same' or 'valid' zero padding."""

    kind = "conv1d"

    def __init__(self, in_channels, out_channels, kernel_size, padding="same", rng=None):
        super().__init__()
        if padding not in ("same", "valid"):
            raise DomainError(f"unknown padding {padding!r}")
        self.hyper = {"in_channels": in_channels, "out_channels": out_channels,
                      "kernel_size": kernel_size, "padding": padding}
        fan_in = in_channels * kernel_size
        fan_out = out_channels * kernel_size
        self.params["w"] = glorot_uniform(fan_in, fan_out,
                                          (out_channels, in_channels, kernel_size), rng)
        self.params["b"] = np.zeros(out_channels)

    def param_names(self):
        return ("w", "b")

    def _pad_amounts(self):
        k = self.hyper["kernel_size"]
        if self.hyper["padding"] == "valid":
            return 0, 0
        total = k - 1
        return total // 2, total - total // 2

    def forward(self, x, mode="train", rng=None):
        _require_3d(x, self.kind)
        if x.shape[1] != self.hyper["in_channels"]:
            raise ShapeError(
                f"conv1d: input has {x.shape[1]} channels, expected {self.hyper['in_channels']}"
            )
        k = self.hyper["kernel_size"]
        left, right = self._pad_amounts()
        xp = np.pad(x, ((0, 0), (0, 0), (left, right))) if (left or right) else x
        if xp.shape[2] < k:
            raise ShapeError(f"conv1d: padded length {xp.shape[2]} shorter than kernel {k}")
        windows = sliding_window_view(xp, k, axis=2)  # (B, Cin, Lout, k)
        y = np.tensordot(windows, self.params["w"], axes=[(1, 3), (1, 2)])  # (B, Lout, Cout)
        y = np.ascontiguousarray(y.transpose(0, 2, 1)) + self.params["b"][None, :, None]
        return y, self._cache(x_padded=xp, in_length=x.shape[2])

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        xp, in_length = cache["x_padded"], cache["in_length"]
        w = self.params["w"]
        k = self.hyper["kernel_size"]
        left, _ = self._pad_amounts()

        grad_b = grad_out.sum(axis=(0, 2))
        windows = sliding_window_view(xp, k, axis=2)  # (B, Cin, Lout, k)
        grad_w = np.tensordot(grad_out, windows, axes=[(0, 2), (0, 2)])  # (Cout, Cin, k)

        # full correlation of grad_out with the flipped kernel recovers grad_x
        gp = np.pad(grad_out, ((0, 0), (0, 0), (k - 1, k - 1)))
        gwin = sliding_window_view(gp, k, axis=2)  # (B, Cout, Lpadded, k)
        w_flip = w[:, :, ::-1]
        gx_padded = np.tensordot(gwin, w_flip, axes=[(1, 3), (0, 2)])  # (B, Lp, Cin)
        gx_padded = gx_padded.transpose(0, 2, 1)
        grad_x = gx_padded[:, :, left:left + in_length]
        return np.ascontiguousarray(grad_x), {"w": grad_w, "b": grad_b}


class BatchNorm(Layer):
    """Per-channel normalization over batch x time; running stats for eval."""

    kind = "batch_norm"

    def __init__(self, channels, momentum=0.99, eps=1e-5):
        super().__init__()
        self.hyper = {"channels": channels, "momentum": momentum, "eps": eps}
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.state["running_mean"] = np.zeros(channels)
        self.state["running_var"] = np.ones(channels)

    def param_names(self):
        return ("gamma", "beta")

    def state_names(self):
        return ("running_mean", "running_var")

    def forward(self, x, mode="train", rng=None):
        _require_3d(x, self.kind)
        if x.shape[1] != self.hyper["channels"]:
            raise ShapeError(f"batch_norm: {x.shape[1]} channels, expected {self.hyper['channels']}")
        eps = self.hyper["eps"]
        if mode == "train":
            mean = x.mean(axis=(0, 2))
            var = x.var(axis=(0, 2))
            m = self.hyper["momentum"]
            self.state["running_mean"] = m * self.state["running_mean"] + (1 - m) * mean
            self.state["running_var"] = m * self.state["running_var"] + (1 - m) * var
        else:
            mean = self.state["running_mean"]
            var = self.state["running_var"]
        inv_std = 1.0 / np.sqrt(var + eps)
        xhat = (x - mean[None, :, None]) * inv_std[None, :, None]
        y = self.params["gamma"][None, :, None] * xhat + self.params["beta"][None, :, None]
        return y, self._cache(xhat=xhat, inv_std=inv_std, mode=mode)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        xhat, inv_std = cache["xhat"], cache["inv_std"]
        gamma = self.params["gamma"]
        grad_gamma = (grad_out * xhat).sum(axis=(0, 2))
        grad_beta = grad_out.sum(axis=(0, 2))
        dxhat = grad_out * gamma[None, :, None]
        if cache["mode"] == "train":
            n = grad_out.shape[0] * grad_out.shape[2]
            grad_x = (inv_std[None, :, None] / n) * (
                n * dxhat
                - dxhat.sum(axis=(0, 2))[None, :, None]
                - xhat * (dxhat * xhat).sum(axis=(0, 2))[None, :, None]
            )
        else:
            grad_x = dxhat * inv_std[None, :, None]
        return grad_x, {"gamma": grad_gamma, "beta": grad_beta}


class Dense(Layer):
    """Affine map on (batch, features); 3-D inputs are flattened first."""

    kind = "dense"

    def __init__(self, in_features, out_features, rng=None):
        super().__init__()
        self.hyper = {"in_features": in_features, "out_features": out_features}
        self.params["w"] = glorot_uniform(in_features, out_features,
                                          (in_features, out_features), rng)
        self.params["b"] = np.zeros(out_features)

    def param_names(self):
        return ("w", "b")

    def forward(self, x, mode="train", rng=None):
        orig_shape = x.shape
        if x.ndim == 3:
            x = x.reshape(x.shape[0], -1)
        if x.ndim != 2 or x.shape[1] != self.hyper["in_features"]:
            raise ShapeError(
                f"dense: got shape {orig_shape}, expected {self.hyper['in_features']} features"
            )
        y = x @ self.params["w"] + self.params["b"]
        return y, self._cache(x2d=x, orig_shape=orig_shape)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        x2d, orig_shape = cache["x2d"], cache["orig_shape"]
        grad_w = x2d.T @ grad_out
        grad_b = grad_out.sum(axis=0)
        grad_x = grad_out @ self.params["w"].T
        return grad_x.reshape(orig_shape), {"w": grad_w, "b": grad_b}


class ReLU(Layer):
    kind = "relu"

    def forward(self, x, mode="train", rng=None):
        mask = x > 0
        return np.where(mask, x, 0.0), self._cache(mask=mask)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        return grad_out * cache["mask"], {}


class Sigmoid(Layer):
    kind = "sigmoid"

    def forward(self, x, mode="train", rng=None):
        y = np.empty_like(x)
        pos = x >= 0
        y[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        ex = np.exp(x[~pos])
        y[~pos] = ex / (1.0 + ex)
        return y, self._cache(y=y)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        y = cache["y"]
        return grad_out * y * (1.0 - y), {}


class PReLU(Layer):
    """Leaky rectifier with one learnable slope per channel (init 0.25)."""

    kind = "prelu"

    def __init__(self, channels):
        super().__init__()
        self.hyper = {"channels": channels}
        self.params["alpha"] = np.full(channels, 0.25)

    def param_names(self):
        return ("alpha",)

    def _alpha_view(self, ndim):
        a = self.params["alpha"]
        return a[None, :, None] if ndim == 3 else a[None, :]

    def forward(self, x, mode="train", rng=None):
        if x.shape[1] != self.hyper["channels"]:
            raise ShapeError(f"prelu: {x.shape[1]} channels, expected {self.hyper['channels']}")
        pos = x > 0
        y = np.where(pos, x, self._alpha_view(x.ndim) * x)
        return y, self._cache(x=x, pos=pos)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        x, pos = cache["x"], cache["pos"]
        grad_x = np.where(pos, grad_out, self._alpha_view(x.ndim) * grad_out)
        neg_contrib = np.where(pos, 0.0, grad_out * x)
        axes = (0, 2) if x.ndim == 3 else (0,)
        return grad_x, {"alpha": neg_contrib.sum(axis=axes)}


class Dropout(Layer):
    """Inverted dropout: train-time mask scaled by 1/(1-rate), eval identity."""

    kind = "dropout"

    def __init__(self, rate):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise DomainError(f"dropout rate must lie in [0, 1), got {rate}")
        self.hyper = {"rate": rate}

    def forward(self, x, mode="train", rng=None):
        rate = self.hyper["rate"]
        if mode != "train" or rate == 0.0:
            return x, self._cache(mask=None)
        if rng is None:
            raise StateError("dropout in train mode needs the run RNG")
        mask = (rng.random(x.shape) >= rate) / (1.0 - rate)
        return x * mask, self._cache(mask=mask)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        mask = cache["mask"]
        return (grad_out if mask is None else grad_out * mask), {}


class _Pool(Layer):
    """Shared plumbing for non-overlapping pooling (stride == width)."""

    def __init__(self, width):
        super().__init__()
        if width < 1:
            raise DomainError(f"pool width must be >= 1, got {width}")
        self.hyper = {"width": width}

    def _window(self, x):
        _require_3d(x, self.kind)
        w = self.hyper["width"]
        n = x.shape[2] // w
        if n < 1:
            raise ShapeError(f"{self.kind}: length {x.shape[2]} shorter than width {w}")
        return x[:, :, : n * w].reshape(x.shape[0], x.shape[1], n, w), n, w


class MaxPool(_Pool):
    kind = "max_pool"

    def forward(self, x, mode="train", rng=None):
        win, n, w = self._window(x)
        idx = win.argmax(axis=3)
        y = np.take_along_axis(win, idx[..., None], axis=3)[..., 0]
        return y, self._cache(idx=idx, in_shape=x.shape, n=n, w=w)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        idx, in_shape, n, w = cache["idx"], cache["in_shape"], cache["n"], cache["w"]
        grad_x = np.zeros(in_shape)
        gwin = grad_x[:, :, : n * w].reshape(in_shape[0], in_shape[1], n, w)
        np.put_along_axis(gwin, idx[..., None], grad_out[..., None], axis=3)
        return grad_x, {}


class AvgPool(_Pool):
    kind = "avg_pool"

    def forward(self, x, mode="train", rng=None):
        win, n, w = self._window(x)
        return win.mean(axis=3), self._cache(in_shape=x.shape, n=n, w=w)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        in_shape, n, w = cache["in_shape"], cache["n"], cache["w"]
        grad_x = np.zeros(in_shape)
        gwin = grad_x[:, :, : n * w].reshape(in_shape[0], in_shape[1], n, w)
        gwin += grad_out[..., None] / w
        return grad_x, {}


class GlobalAvgPool(Layer):
    """Mean over time: (B, C, T) -> (B, C); makes conv heads length-invariant."""

    kind = "global_avg_pool"

    def forward(self, x, mode="train", rng=None):
        _require_3d(x, self.kind)
        return x.mean(axis=2), self._cache(in_shape=x.shape)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        b, c, t = cache["in_shape"]
        return np.broadcast_to(grad_out[:, :, None] / t, (b, c, t)).copy(), {}


class Softmax(Layer):
    kind = "softmax"

    def forward(self, x, mode="train", rng=None):
        z = x - x.max(axis=1, keepdims=True)
        e = np.exp(z)
        y = e / e.sum(axis=1, keepdims=True)
        return y, self._cache(y=y)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        y = cache["y"]
        dot = (grad_out * y).sum(axis=1, keepdims=True)
        return y * (grad_out - dot), {}


class Add(Layer):
    """Residual merge: elementwise sum of two equally shaped inputs."""

    kind = "add"
    n_inputs = 2

    def forward(self, xs, mode="train", rng=None):
        a, b = xs
        if a.shape != b.shape:
            raise ShapeError(f"add: shapes {a.shape} and {b.shape} differ")
        return a + b, self._cache()

    def backward(self, cache, grad_out):
        self._check_cache(cache)
        return (grad_out, grad_out), {}


class Concat(Layer):
    """Channel-axis concatenation of two inputs."""

    kind = "concat"
    n_inputs = 2

    def forward(self, xs, mode="train", rng=None):
        a, b = xs
        if a.shape[0] != b.shape[0] or a.shape[2:] != b.shape[2:]:
            raise ShapeError(f"concat: shapes {a.shape} and {b.shape} disagree off-channel")
        return np.concatenate([a, b], axis=1), self._cache(split=a.shape[1])

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        s = cache["split"]
        return (grad_out[:, :s], grad_out[:, s:]), {}


class AttentionFuse(Layer):
    """Time attention: softmax over time from the first half of the channels
    weights the second half, summed over time.  (B, 2C, T) -> (B, C)."""

    kind = "attention_fuse"

    def forward(self, x, mode="train", rng=None):
        _require_3d(x, self.kind)
        if x.shape[1] % 2:
            raise ShapeError(f"attention_fuse: channel count {x.shape[1]} must be even")
        half = x.shape[1] // 2
        a, g = x[:, :half], x[:, half:]
        z = a - a.max(axis=2, keepdims=True)
        e = np.exp(z)
        s = e / e.sum(axis=2, keepdims=True)
        y = (s * g).sum(axis=2)
        return y, self._cache(s=s, g=g)

    def backward(self, cache, grad_out):
        cache = self._check_cache(cache)
        s, g = cache["s"], cache["g"]
        gy = grad_out[:, :, None]
        grad_g = s * gy
        ds = g * gy
        grad_a = s * (ds - (ds * s).sum(axis=2, keepdims=True))
        return np.concatenate([grad_a, grad_g], axis=1), {}
