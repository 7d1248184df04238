"""Layer catalog: each layer has a forward rule and an exact adjoint.

Layers are callables taking ``(x, mode="train"|"eval", rng=None)``.  Train
mode uses batch statistics and random dropout masks; eval mode uses running
statistics and identity dropout.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, DimensionError
from .params import ParameterStore
from .tensor import (
    Tensor,
    _result,
    add,
    concat,
    matmul,
    max_over_axis,
    mean,
    mul,
    relu as relu_op,
    reshape,
    sigmoid as sigmoid_op,
    softmax as softmax_op,
    sub,
    transpose,
)

__all__ = [
    "Affine",
    "ReLU",
    "Sigmoid",
    "Softmax",
    "BatchNorm",
    "Dropout",
    "Conv2d",
    "GlobalAvgPool",
    "SetMaxPool",
    "set_max_pool",
    "concat",
]


class Affine:
    """Fully connected layer: ``x @ w + b`` on row-major feature matrices."""

    def __init__(self, store: ParameterStore, name: str, fan_in: int, fan_out: int):
        self.fan_in = fan_in
        self.fan_out = fan_out
        self.w = store.create(f"{name}.w", (fan_in, fan_out), init="kaiming", fan_in=fan_in)
        self.b = store.create(f"{name}.b", (fan_out,), init="zeros")

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        if x.shape[-1] != self.fan_in:
            raise DimensionError("affine: fan-in mismatch", x.shape, (self.fan_in, self.fan_out))
        return add(matmul(x, self.w), self.b)


class ReLU:
    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        return relu_op(x)


class Sigmoid:
    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        return sigmoid_op(x)


class Softmax:
    def __init__(self, axis: int = -1):
        self.axis = axis

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        return softmax_op(x, axis=self.axis)


def _batchnorm_rows(x: Tensor, gamma: Tensor, beta: Tensor, eps: float) -> tuple[Tensor, np.ndarray, np.ndarray]:
    """Fused train-mode batchnorm over axis 0 of a (rows, C) tensor.

    Returns the output plus the batch mean/var used (for the running stats).
    The backward pass is written pass-lean because this sits on the hottest
    activations of the per-point trunk.
    """
    xd = x.data
    mu = xd.mean(axis=0)
    var = xd.var(axis=0)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xd - mu
    xhat *= inv
    out = xhat * gamma.data
    out += beta.data
    rows = xd.shape[0]

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate(np.einsum("rc,rc->c", g, xhat), owned=True)
        if beta.requires_grad:
            beta._accumulate(g.sum(axis=0), owned=True)
        if x.requires_grad:
            # standard adjoint for biased batch variance:
            # dx = inv * (dxhat - mean(dxhat) - xhat * mean(dxhat * xhat))
            dx = g * gamma.data
            col_mean = dx.mean(axis=0)
            col_dot = np.einsum("rc,rc->c", dx, xhat)
            col_dot /= rows
            dx -= col_mean
            dx -= xhat * col_dot
            dx *= inv
            x._accumulate(dx, owned=True)

    return _result(out, (x, gamma, beta), backward), mu, var


class BatchNorm:
    """Batch normalization over rows (N, C) or feature maps (N, C, H, W).

    Statistics are taken over every axis except the channel axis, so pointwise
    layers applied to (batch * points, width) matrices normalize over both the
    batch and the points.
    """

    def __init__(self, store: ParameterStore, name: str, width: int, eps: float = 1e-5, momentum: float = 0.1):
        if eps <= 0:
            raise ContractError("batchnorm epsilon must be > 0")
        self.width = width
        self.eps = eps
        self.momentum = momentum
        self.gamma = store.create(f"{name}.gamma", (width,), init="ones")
        self.beta = store.create(f"{name}.beta", (width,), init="zeros")
        self.running_mean = store.buffer(f"{name}.running_mean", np.zeros(width))
        self.running_var = store.buffer(f"{name}.running_var", np.ones(width))

    def _as_rows(self, x: Tensor) -> tuple[Tensor, tuple | None]:
        if x.ndim == 2:
            return x, None
        if x.ndim == 4:
            b, c, h, w = x.shape
            rows = reshape(transpose(x, (0, 2, 3, 1)), (b * h * w, c))
            return rows, (b, h, w, c)
        raise DimensionError("batchnorm expects (N, C) or (N, C, H, W)", x.shape, None)

    def _from_rows(self, rows: Tensor, packed: tuple | None) -> Tensor:
        if packed is None:
            return rows
        b, h, w, c = packed
        return transpose(reshape(rows, (b, h, w, c)), (0, 3, 1, 2))

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        rows, packed = self._as_rows(x)
        if rows.shape[1] != self.width:
            raise DimensionError("batchnorm: channel mismatch", rows.shape, (self.width,))
        if mode == "train":
            out, mu, var = _batchnorm_rows(rows, self.gamma, self.beta, self.eps)
            m = self.momentum
            self.running_mean *= 1.0 - m
            self.running_mean += m * mu
            self.running_var *= 1.0 - m
            self.running_var += m * var
        else:
            inv = 1.0 / np.sqrt(self.running_var + self.eps)
            shift = Tensor(self.running_mean, validate=False)
            scale_const = Tensor(inv, validate=False)
            xhat = mul(sub(rows, shift), scale_const)
            out = add(mul(xhat, self.gamma), self.beta)
        return self._from_rows(out, packed)


class Dropout:
    """Inverted dropout; identity in eval mode."""

    def __init__(self, rate: float = 0.3):
        if not 0.0 <= rate < 1.0:
            raise ContractError(f"dropout rate must be in [0, 1), got {rate}")
        self.rate = rate

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        if mode != "train" or self.rate == 0.0:
            return x
        if rng is None:
            raise ContractError("train-mode dropout needs an explicit rng")
        keep = (rng.random(x.shape) >= self.rate).astype(x.data.dtype)
        keep /= 1.0 - self.rate
        return mul(x, Tensor(keep, validate=False))


class Conv2d:
    """3x3-style convolution via im2col, with a scatter-add adjoint."""

    def __init__(self, store: ParameterStore, name: str, c_in: int, c_out: int,
                 kernel: int = 3, stride: int = 1, pad: int = 1):
        self.c_in = c_in
        self.c_out = c_out
        self.kernel = kernel
        self.stride = stride
        self.pad = pad
        fan_in = c_in * kernel * kernel
        self.w = store.create(f"{name}.w", (c_out, fan_in), init="kaiming", fan_in=fan_in)
        self.b = store.create(f"{name}.b", (c_out,), init="zeros")

    def _im2col(self, xp: np.ndarray, h_out: int, w_out: int) -> np.ndarray:
        b, c, _, _ = xp.shape
        k, s = self.kernel, self.stride
        sb, sc, sh, sw = xp.strides
        windows = np.lib.stride_tricks.as_strided(
            xp,
            shape=(b, c, k, k, h_out, w_out),
            strides=(sb, sc, sh, sw, sh * s, sw * s),
            writeable=False,
        )
        # (b, h_out, w_out, c, k, k) -> rows of receptive fields
        return np.ascontiguousarray(windows.transpose(0, 4, 5, 1, 2, 3)).reshape(
            b * h_out * w_out, c * k * k
        )

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        if x.ndim != 4 or x.shape[1] != self.c_in:
            raise DimensionError("conv2d: expected (B, C_in, H, W)", x.shape, (self.c_in,))
        b, _, h, w = x.shape
        k, s, p = self.kernel, self.stride, self.pad
        h_out = (h + 2 * p - k) // s + 1
        w_out = (w + 2 * p - k) // s + 1
        xp = np.pad(x.data, ((0, 0), (0, 0), (p, p), (p, p))) if p else x.data
        col = self._im2col(xp, h_out, w_out)
        out = (col @ self.w.data.T + self.b.data).reshape(b, h_out, w_out, self.c_out)
        out = out.transpose(0, 3, 1, 2)

        weight, bias = self.w, self.b
        c_in = self.c_in

        def backward(g):
            g_rows = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(-1, weight.shape[0])
            if bias.requires_grad:
                bias._accumulate(g_rows.sum(axis=0), owned=True)
            if weight.requires_grad:
                weight._accumulate(g_rows.T @ col, owned=True)
            if x.requires_grad:
                dcol = (g_rows @ weight.data).reshape(b, h_out, w_out, c_in, k, k)
                dcol = dcol.transpose(0, 3, 4, 5, 1, 2)  # (b, c, k, k, h_out, w_out)
                gpad = np.zeros_like(xp)
                for ki in range(k):
                    for kj in range(k):
                        gpad[:, :, ki : ki + s * h_out : s, kj : kj + s * w_out : s] += dcol[:, :, ki, kj]
                x._accumulate(np.ascontiguousarray(gpad[:, :, p : p + h, p : p + w]) if p else gpad, owned=True)

        return _result(out, (x, self.w, self.b), backward)


class GlobalAvgPool:
    """(B, C, H, W) -> (B, C) spatial mean."""

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        if x.ndim != 4:
            raise DimensionError("global_avg_pool expects (B, C, H, W)", x.shape, None)
        return mean(x, axis=(2, 3))


class SetMaxPool:
    """Columnwise max over the set axis of (B, m, d) batches."""

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        if x.ndim != 3 or x.shape[1] == 0:
            raise ContractError(f"set max pool expects non-empty (B, m, d), got {x.shape}")
        return max_over_axis(x, axis=1)


def set_max_pool(features: Tensor) -> Tensor:
    """Order-invariant columnwise max of an (m, d) feature set.

    Gradient routes to the lowest row index among tied maxima.
    """
    if features.ndim != 2:
        raise DimensionError("set_max_pool expects (m, d)", features.shape, None)
    if features.shape[0] == 0:
        raise ContractError("set_max_pool on an empty set")
    return max_over_axis(features, axis=0)
