"""Manifests and synthetic dataset generation."""

from .manifest import Manifest, SampleRecord, read_manifest, split_manifest, write_manifest
from .synthetic import TASKS, SynthConfig, generate, render_sample

__all__ = [
    "Manifest", "SampleRecord", "read_manifest", "split_manifest", "write_manifest",
    "TASKS", "SynthConfig", "generate", "render_sample",
]
