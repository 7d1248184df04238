"""Encoders and fusion variants."""

from .cnn import ImageEncoder, ImageEncoderConfig
from .pointnet import PointCloudEncoder, PointEncoderConfig, TNet, transform_regularizer
from .fusion import (
    FUSION_KEY_TO_VARIANT,
    ROLE_LENGTHS,
    VARIANTS,
    AttentionFusionHead,
    ClassifierHead,
    CloudProjection,
    CrossAttention,
    FeatureVector,
    ModelConfig,
    SimNetModel,
    ccm_fuse,
    concat_fuse,
)

__all__ = [
    "ImageEncoder", "ImageEncoderConfig",
    "PointCloudEncoder", "PointEncoderConfig", "TNet", "transform_regularizer",
    "FUSION_KEY_TO_VARIANT", "ROLE_LENGTHS", "VARIANTS",
    "AttentionFusionHead", "ClassifierHead", "CloudProjection", "CrossAttention",
    "FeatureVector", "ModelConfig", "SimNetModel", "ccm_fuse", "concat_fuse",
]
