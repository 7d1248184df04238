"""Classification losses.

Both losses return the mean over the batch as a differentiable scalar.
"""

from __future__ import annotations

import numpy as np

from ..errors import ContractError, LabelError
from .tensor import Tensor, _result

BCE_CLAMP = 1e-7


def _check_binary_labels(labels: np.ndarray):
    if not np.isin(labels, (0, 1)).all():
        raise LabelError(f"binary labels must be 0/1, got values {np.unique(labels)}")


def bce_on_sigmoid(probs: Tensor, labels) -> Tensor:
    """Binary cross-entropy on sigmoid outputs, clamped to [1e-7, 1 - 1e-7]."""
    y = np.asarray(labels, dtype=probs.data.dtype).reshape(-1)
    p = probs.data.reshape(-1)
    if p.shape != y.shape:
        raise ContractError(f"probs/labels length mismatch: {p.shape} vs {y.shape}")
    _check_binary_labels(y)
    p_hat = np.clip(p, BCE_CLAMP, 1.0 - BCE_CLAMP)
    n = p.shape[0]
    value = -(y * np.log(p_hat) + (1.0 - y) * np.log1p(-p_hat)).mean()
    inside = (p > BCE_CLAMP) & (p < 1.0 - BCE_CLAMP)

    def backward(g):
        gp = np.where(inside, (p_hat - y) / (p_hat * (1.0 - p_hat)), 0.0)
        probs._accumulate((float(g) * gp / n).reshape(probs.shape))

    return _result(np.asarray(value, dtype=probs.data.dtype), (probs,), backward)


def softmax_cross_entropy(logits: Tensor, labels) -> Tensor:
    """Cross-entropy on raw logits (stable log-softmax inside)."""
    y = np.asarray(labels)
    if logits.ndim != 2:
        raise ContractError(f"softmax_cross_entropy expects (B, K) logits, got {logits.shape}")
    n, k = logits.shape
    if y.shape != (n,):
        raise ContractError(f"labels must be ({n},), got {y.shape}")
    if y.min() < 0 or y.max() >= k:
        raise LabelError(f"labels must lie in [0, {k}), got range [{y.min()}, {y.max()}]")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    value = (lse - z[np.arange(n), y]).mean()
    probs = np.exp(z - zmax)
    probs /= probs.sum(axis=1, keepdims=True)

    def backward(g):
        grad = probs.copy()
        grad[np.arange(n), y] -= 1.0
        logits._accumulate(float(g) * grad / n)

    return _result(np.asarray(value, dtype=logits.data.dtype), (logits,), backward)


def loss(output: Tensor, labels, kind: str) -> Tensor:
    """Dispatch on loss kind: ``bce_on_sigmoid`` gets probabilities in (0, 1),
    ``softmax_ce`` gets raw logits."""
    if kind == "bce_on_sigmoid":
        return bce_on_sigmoid(output, labels)
    if kind == "softmax_ce":
        return softmax_cross_entropy(output, labels)
    raise ContractError(f"unknown loss kind {kind!r}")
