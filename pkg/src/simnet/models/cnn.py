"""Compact convolutional image encoder honoring a fixed feature-size contract.

A stack of conv -> batchnorm -> ReLU blocks with stride-2 downsampling,
global average pooling, and an affine projection to the configured feature
size (2048 by default).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import ContractError, DimensionError
from ..nn.layers import Affine, BatchNorm, Conv2d, GlobalAvgPool, ReLU
from ..nn.params import ParameterStore
from ..nn.tensor import Tensor


@dataclass
class ImageEncoderConfig:
    input_size: int = 224
    conv_widths: tuple = (16, 32, 64, 128, 256)
    feature_size: int = 2048

    def __post_init__(self):
        if self.input_size < 2 ** len(self.conv_widths):
            raise ContractError(
                f"{len(self.conv_widths)} stride-2 blocks need input >= {2 ** len(self.conv_widths)}"
            )


class ImageEncoder:
    def __init__(self, cfg: ImageEncoderConfig, store: ParameterStore, name: str = "image_encoder"):
        self.cfg = cfg
        self.blocks = []
        prev = 3
        for i, w in enumerate(cfg.conv_widths):
            self.blocks.append((Conv2d(store, f"{name}.conv{i}", prev, w, kernel=3, stride=2, pad=1),
                                BatchNorm(store, f"{name}.bn{i}", w)))
            prev = w
        self.pool = GlobalAvgPool()
        self.project = Affine(store, f"{name}.project", prev, cfg.feature_size)
        self.relu = ReLU()

    def __call__(self, images: Tensor, mode: str = "train", rng=None) -> Tensor:
        """(B, 3, S, S) in [0, 1] -> (B, feature_size)."""
        s = self.cfg.input_size
        if images.ndim != 4 or images.shape[1] != 3 or images.shape[2] != s or images.shape[3] != s:
            raise DimensionError("image batch shape mismatch", images.shape, (None, 3, s, s))
        h = images
        for conv, bn in self.blocks:
            h = self.relu(bn(conv(h), mode))
        return self.project(self.pool(h))
