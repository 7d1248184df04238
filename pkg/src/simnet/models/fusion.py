"""Late fusion of image and point-cloud features, and the classifier heads.

Variants, selected by config key:
  concat     - project the cloud feature to 8 dims, concatenate after the
               2048-d image feature (2056 total), three-layer MLP head
  ca_pc2img  - single-token cross attention, cloud queries image
  ca_img2pc  - single-token cross attention, image queries cloud
  bca        - both directions computed independently, concatenated (1024)
  ccm        - second image encoder on the color-coded coordinate mask,
               2048 + 256 = 2304 concatenation
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError, DimensionError
from ..nn.layers import Affine, BatchNorm, Dropout, ReLU
from ..nn.params import ParameterStore
from ..nn.tensor import Tensor, concat, mul, reshape, sigmoid, softmax, tensor_sum
from .cnn import ImageEncoder, ImageEncoderConfig
from .pointnet import PointCloudEncoder, PointEncoderConfig, transform_regularizer

ROLE_LENGTHS = {
    "image": 2048,
    "cloud_global": 1024,
    "cloud_projected": 8,
    "fused": 2056,
    "ccm": 256,
}

VARIANTS = (
    "image_only",
    "cloud_only",
    "simnet_concat",
    "simnet_ca_pc2img",
    "simnet_ca_img2pc",
    "simnet_bca",
    "ccm_fusion",
)

FUSION_KEY_TO_VARIANT = {
    "concat": "simnet_concat",
    "ca_pc2img": "simnet_ca_pc2img",
    "ca_img2pc": "simnet_ca_img2pc",
    "bca": "simnet_bca",
    "ccm": "ccm_fusion",
}


@dataclass
class FeatureVector:
    """1-D feature tagged with its role; the length must match the role
    contract (or an explicitly overridden length)."""

    role: str
    values: np.ndarray
    length: int | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float32).reshape(-1)
        expected = self.length if self.length is not None else ROLE_LENGTHS.get(self.role)
        if expected is None:
            raise ContractError(f"unknown feature role {self.role!r}")
        if self.values.shape[0] != expected:
            raise DimensionError(f"{self.role} feature length", self.values.shape[0], expected)


class CloudProjection:
    """MLP projecting the global cloud feature down to the fusion width."""

    def __init__(self, store: ParameterStore, in_dim: int = 1024, out_dim: int = 8, name: str = "mlp_p"):
        self.in_dim = in_dim
        self.out_dim = out_dim
        self.fc = Affine(store, name, in_dim, out_dim)
        self.relu = ReLU()

    def __call__(self, gfv: Tensor, mode: str = "train", rng=None) -> Tensor:
        if gfv.shape[-1] != self.in_dim:
            raise DimensionError("cloud projection input length", gfv.shape[-1], self.in_dim)
        return self.relu(self.fc(gfv))


def concat_fuse(ifv: Tensor, pfv: Tensor) -> Tensor:
    """Image features first, then cloud features."""
    return concat([ifv, pfv], axis=-1)


class ClassifierHead:
    """Three fully connected layers with ReLU, batchnorm and dropout between,
    then sigmoid (binary) or softmax (multiclass)."""

    def __init__(self, store: ParameterStore, name: str, in_dim: int,
                 hidden: tuple = (512, 128), n_classes: int = 2, dropout: float = 0.3):
        self.n_classes = n_classes
        self.n_out = 1 if n_classes == 2 else n_classes
        self.layers = []
        prev = in_dim
        for i, w in enumerate(hidden):
            self.layers.append((Affine(store, f"{name}.fc{i}", prev, w),
                                BatchNorm(store, f"{name}.bn{i}", w),
                                Dropout(dropout)))
            prev = w
        self.out = Affine(store, f"{name}.out", prev, self.n_out)
        self.relu = ReLU()

    def __call__(self, x: Tensor, mode: str = "train", rng=None) -> Tensor:
        h = x
        for fc, bn, drop in self.layers:
            h = drop(self.relu(bn(fc(h), mode)), mode, rng)
        logits = self.out(h)
        if self.n_out == 1:
            return reshape(sigmoid(logits), (x.shape[0],))
        return softmax(logits, axis=-1)


class CrossAttention:
    """Scaled dot-product attention between two single-token features.

    Both features are projected into a shared embedding space; with one token
    on each side the softmax weight is exactly 1, so the output reduces to
    ``out_proj(value_proj(kv))``.
    """

    def __init__(self, store: ParameterStore, name: str, query_dim: int, kv_dim: int, embed_dim: int = 512):
        self.embed_dim = embed_dim
        self.q_proj = Affine(store, f"{name}.q", query_dim, embed_dim)
        self.k_proj = Affine(store, f"{name}.k", kv_dim, embed_dim)
        self.v_proj = Affine(store, f"{name}.v", kv_dim, embed_dim)
        self.out_proj = Affine(store, f"{name}.out", embed_dim, embed_dim)

    def __call__(self, query: Tensor, key_value: Tensor, mode: str = "train", rng=None):
        """Returns (attended (B, embed), attention weights (B, 1))."""
        q = self.q_proj(query)
        k = self.k_proj(key_value)
        v = self.v_proj(key_value)
        score = tensor_sum(mul(q, k), axis=-1, keepdims=True)
        score = mul(score, Tensor(np.asarray(1.0 / np.sqrt(self.embed_dim), dtype=q.data.dtype), validate=False))
        weights = softmax(score, axis=-1)  # a single token: exactly 1.0
        attended = mul(v, weights)
        return self.out_proj(attended), weights


class AttentionFusionHead:
    """Cross-attention fusion plus the classification layer (batchnorm and
    dropout applied to the fused embedding, per the reference design)."""

    def __init__(self, store: ParameterStore, name: str, image_dim: int, cloud_dim: int,
                 direction: str, n_classes: int = 2, embed_dim: int = 512, dropout: float = 0.3):
        if direction not in ("cloud_queries_image", "image_queries_cloud", "bidirectional"):
            raise ContractError(f"unknown attention direction {direction!r}")
        self.direction = direction
        self.n_classes = n_classes
        self.n_out = 1 if n_classes == 2 else n_classes
        self.branches = {}
        if direction in ("cloud_queries_image", "bidirectional"):
            self.branches["pc2img"] = CrossAttention(store, f"{name}.pc2img", cloud_dim, image_dim, embed_dim)
        if direction in ("image_queries_cloud", "bidirectional"):
            self.branches["img2pc"] = CrossAttention(store, f"{name}.img2pc", image_dim, cloud_dim, embed_dim)
        fused_dim = embed_dim * len(self.branches)
        self.fused_dim = fused_dim
        self.bn = BatchNorm(store, f"{name}.bn", fused_dim)
        self.drop = Dropout(dropout)
        self.out = Affine(store, f"{name}.out", fused_dim, self.n_out)

    def fuse(self, ifv: Tensor, gfv: Tensor, mode: str = "train") -> Tensor:
        parts = []
        if "pc2img" in self.branches:
            attended, _ = self.branches["pc2img"](gfv, ifv, mode)
            parts.append(attended)
        if "img2pc" in self.branches:
            attended, _ = self.branches["img2pc"](ifv, gfv, mode)
            parts.append(attended)
        return parts[0] if len(parts) == 1 else concat(parts, axis=-1)

    def __call__(self, ifv: Tensor, gfv: Tensor, mode: str = "train", rng=None) -> Tensor:
        fused = self.fuse(ifv, gfv, mode)
        h = self.drop(self.bn(fused, mode), mode, rng)
        logits = self.out(h)
        if self.n_out == 1:
            return reshape(sigmoid(logits), (ifv.shape[0],))
        return softmax(logits, axis=-1)


def ccm_fuse(ifv: Tensor, ccmfv: Tensor) -> Tensor:
    """Image block first, then the CCM block."""
    return concat([ifv, ccmfv], axis=-1)


@dataclass
class ModelConfig:
    variant: str = "simnet_concat"
    n_classes: int = 2
    image: ImageEncoderConfig = field(default_factory=ImageEncoderConfig)
    point: PointEncoderConfig = field(default_factory=PointEncoderConfig)
    cloud_projection_dim: int = 8
    head_hidden: tuple = (512, 128)
    dropout: float = 0.3
    attention_dim: int = 512
    ccm_feature_size: int = 256

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ContractError(f"unknown model variant {self.variant!r} (choose from {VARIANTS})")


class SimNetModel:
    """The full variant network: encoders plus a fusion/classification path."""

    def __init__(self, cfg: ModelConfig, store: ParameterStore):
        self.cfg = cfg
        self.store = store
        v = cfg.variant
        self.needs_image = v != "cloud_only"
        self.needs_cloud = v not in ("image_only", "ccm_fusion")
        self.needs_ccm = v == "ccm_fusion"

        self.image_encoder = ImageEncoder(cfg.image, store) if self.needs_image else None
        self.point_encoder = PointCloudEncoder(cfg.point, store) if self.needs_cloud else None
        self.ccm_encoder = None
        self.projection = None
        self.attention_head = None
        self.head = None

        if v == "image_only":
            self.head = ClassifierHead(store, "head", cfg.image.feature_size,
                                       cfg.head_hidden, cfg.n_classes, cfg.dropout)
        elif v == "cloud_only":
            self.head = ClassifierHead(store, "head", cfg.point.feature_size,
                                       cfg.head_hidden, cfg.n_classes, cfg.dropout)
        elif v == "simnet_concat":
            self.projection = CloudProjection(store, cfg.point.feature_size, cfg.cloud_projection_dim)
            self.head = ClassifierHead(store, "head", cfg.image.feature_size + cfg.cloud_projection_dim,
                                       cfg.head_hidden, cfg.n_classes, cfg.dropout)
        elif v in ("simnet_ca_pc2img", "simnet_ca_img2pc", "simnet_bca"):
            direction = {
                "simnet_ca_pc2img": "cloud_queries_image",
                "simnet_ca_img2pc": "image_queries_cloud",
                "simnet_bca": "bidirectional",
            }[v]
            self.attention_head = AttentionFusionHead(
                store, "attention", cfg.image.feature_size, cfg.point.feature_size,
                direction, cfg.n_classes, cfg.attention_dim, cfg.dropout)
        elif v == "ccm_fusion":
            ccm_cfg = ImageEncoderConfig(cfg.image.input_size, cfg.image.conv_widths, cfg.ccm_feature_size)
            self.ccm_encoder = ImageEncoder(ccm_cfg, store, name="ccm_encoder")
            self.head = ClassifierHead(store, "head", cfg.image.feature_size + cfg.ccm_feature_size,
                                       cfg.head_hidden, cfg.n_classes, cfg.dropout)

    def forward(self, images: Tensor | None = None, clouds: Tensor | None = None,
                ccms: Tensor | None = None, mode: str = "eval", rng=None):
        """Returns (probabilities, transform matrices for the regularizer).

        Binary output is a (B,) probability vector, multiclass a (B, K)
        distribution.
        """
        transforms = []
        ifv = gfv = None
        if self.needs_image:
            if images is None:
                raise ContractError(f"variant {self.cfg.variant} needs images")
            ifv = self.image_encoder(images, mode)
        if self.needs_cloud:
            if clouds is None:
                raise ContractError(f"variant {self.cfg.variant} needs point clouds")
            gfv, transforms = self.point_encoder(clouds, mode)

        v = self.cfg.variant
        if v == "image_only":
            probs = self.head(ifv, mode, rng)
        elif v == "cloud_only":
            probs = self.head(gfv, mode, rng)
        elif v == "simnet_concat":
            pfv = self.projection(gfv, mode)
            probs = self.head(concat_fuse(ifv, pfv), mode, rng)
        elif v in ("simnet_ca_pc2img", "simnet_ca_img2pc", "simnet_bca"):
            probs = self.attention_head(ifv, gfv, mode, rng)
        else:  # ccm_fusion
            if ccms is None:
                raise ContractError("ccm_fusion needs CCM rasters")
            ccmfv = self.ccm_encoder(ccms, mode)
            probs = self.head(ccm_fuse(ifv, ccmfv), mode, rng)
        return probs, transforms

    def regularization(self, transforms) -> Tensor | None:
        """Orthogonality penalty for the feature transform, when enabled."""
        if not self.needs_cloud or not self.cfg.point.use_feature_transform:
            return None
        if self.cfg.point.transform_penalty == 0.0 or len(transforms) < 2:
            return None
        return transform_regularizer(transforms[-1], self.cfg.point.transform_penalty)
