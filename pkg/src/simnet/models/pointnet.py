"""Point-cloud encoder: shared per-point MLP + order-invariant global max pool.

The encoder maps a batch of clouds (B, m, d) to a global feature of length
``widths[-1]`` (1024 in the standard configuration).  An optional learned
input transform aligns the (x, y, z) coordinates before the trunk; the color
columns of 6-D clouds bypass it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DimensionError
from ..nn.layers import Affine, BatchNorm, ReLU, SetMaxPool
from ..nn.params import ParameterStore
from ..nn.tensor import Tensor, concat, matmul, mean as t_mean, mul, narrow, reshape, sub, tensor_sum, transpose


@dataclass
class PointEncoderConfig:
    dims: int = 3
    widths: tuple = (64, 128, 1024)
    use_input_transform: bool = True
    use_feature_transform: bool = False
    transform_penalty: float = 0.001

    def __post_init__(self):
        if self.dims not in (3, 6):
            raise ContractError(f"point dims must be 3 or 6, got {self.dims}")
        if self.transform_penalty < 0:
            raise ContractError("transform penalty must be >= 0")

    @property
    def feature_size(self) -> int:
        return self.widths[-1]


class TNet:
    """Small alignment network predicting a k x k transform per cloud.

    The output layer is zero-initialized with an identity bias, so the
    predicted transform starts at the identity.
    """

    def __init__(self, store: ParameterStore, name: str, k: int,
                 widths: tuple = (32, 64), fc_widths: tuple = (32,)):
        self.k = k
        self.blocks = []
        prev = k
        for i, w in enumerate(widths):
            self.blocks.append((Affine(store, f"{name}.mlp{i}", prev, w),
                                BatchNorm(store, f"{name}.bn{i}", w)))
            prev = w
        self.pool = SetMaxPool()
        self.fc = []
        for i, w in enumerate(fc_widths):
            self.fc.append((Affine(store, f"{name}.fc{i}", prev, w),
                            BatchNorm(store, f"{name}.fcbn{i}", w)))
            prev = w
        self.out = Affine(store, f"{name}.out", prev, k * k)
        self.out.w.data[...] = 0.0
        self.out.b.data[...] = np.eye(k, dtype=self.out.b.data.dtype).reshape(-1)
        self.relu = ReLU()

    def __call__(self, points: Tensor, mode: str = "train", rng=None) -> Tensor:
        b, m, _ = points.shape
        h = reshape(points, (b * m, points.shape[2]))
        for fc, bn in self.blocks:
            h = self.relu(bn(fc(h), mode))
        pooled = self.pool(reshape(h, (b, m, h.shape[1])))
        g = pooled
        for fc, bn in self.fc:
            g = self.relu(bn(fc(g), mode))
        return reshape(self.out(g), (b, self.k, self.k))


class PointCloudEncoder:
    """PointNet-style set encoder: h applied per point, g = columnwise max."""

    def __init__(self, cfg: PointEncoderConfig, store: ParameterStore, name: str = "point_encoder"):
        self.cfg = cfg
        self.input_tnet = TNet(store, f"{name}.tnet_in", 3) if cfg.use_input_transform else None
        self.feature_tnet = (
            TNet(store, f"{name}.tnet_feat", cfg.widths[0]) if cfg.use_feature_transform else None
        )
        self.blocks = []
        prev = cfg.dims
        for i, w in enumerate(cfg.widths):
            self.blocks.append((Affine(store, f"{name}.mlp{i}", prev, w),
                                BatchNorm(store, f"{name}.bn{i}", w)))
            prev = w
        self.pool = SetMaxPool()
        self.relu = ReLU()

    def __call__(self, clouds: Tensor, mode: str = "train", rng=None):
        """Returns (global feature (B, widths[-1]), transform matrices)."""
        if clouds.ndim != 3 or clouds.shape[2] != self.cfg.dims:
            raise DimensionError("cloud batch shape mismatch", clouds.shape, (None, None, self.cfg.dims))
        b, m, d = clouds.shape
        transforms = []
        h = clouds
        if self.input_tnet is not None:
            t_in = self.input_tnet(clouds, mode)
            transforms.append(t_in)
            xyz = matmul(narrow(clouds, 2, 0, 3), t_in)
            h = concat([xyz, narrow(clouds, 2, 3, 3)], axis=2) if d == 6 else xyz

        h = reshape(h, (b * m, d))
        for i, (fc, bn) in enumerate(self.blocks):
            h = self.relu(bn(fc(h), mode))
            if i == 0 and self.feature_tnet is not None:
                w0 = h.shape[1]
                t_feat = self.feature_tnet(reshape(h, (b, m, w0)), mode)
                transforms.append(t_feat)
                h = reshape(matmul(reshape(h, (b, m, w0)), t_feat), (b * m, w0))
        per_point = reshape(h, (b, m, h.shape[1]))
        return self.pool(per_point), transforms


def transform_regularizer(transform: Tensor, weight: float) -> Tensor:
    """weight * ||I - A @ A^T||_F^2, averaged over the batch when A is batched."""
    if transform.ndim == 2:
        a = reshape(transform, (1,) + transform.shape)
    elif transform.ndim == 3:
        a = transform
    else:
        raise DimensionError("transform must be (k, k) or (B, k, k)", transform.shape, None)
    k = a.shape[-1]
    if a.shape[-2] != k:
        raise DimensionError("transform must be square", transform.shape, None)
    eye = Tensor(np.broadcast_to(np.eye(k, dtype=a.data.dtype), a.shape).copy(), validate=False)
    diff = sub(eye, matmul(a, transpose(a, (0, 2, 1))))
    per_sample = tensor_sum(mul(diff, diff), axis=(1, 2))
    penalty = t_mean(per_sample)
    return mul(penalty, Tensor(np.asarray(weight, dtype=a.data.dtype), validate=False))
