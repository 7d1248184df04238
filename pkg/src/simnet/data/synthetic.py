"""Seeded synthetic datasets whose class signal lives in a chosen modality.

Three binary tasks on small rasters:

* ``shape``   - class 0 renders smooth blobs, class 1 spiked (star-like)
  blobs.  Foreground colors for paired samples of the two classes are drawn
  from one shared stream, so texture statistics are uninformative.
* ``texture`` - identical silhouette distribution for both classes; class 1
  uses a wider per-pixel color noise, so only color statistics separate them.
* ``zsignal`` - identical silhouettes and matched per-channel marginals; the
  classes differ in the spatial frequency of the channel-mean field, so the
  lifted z coordinate carries the whole signal.

Every sample also gets background clutter (bars and patches reminiscent of
labels and scale strips) strictly outside the mask, and a background base
color close to the foreground base, which is what makes the image modality
genuinely hard and the mask-derived cloud informative.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..clouds import image_to_cloud, write_cloud
from ..errors import ContractError, DataError
from ..images import MaskImage, RgbImage, apply_mask, save_image, save_mask
from .manifest import Manifest, SampleRecord, write_manifest

TASKS = ("shape", "texture", "zsignal")

# foreground/background base colors share this band; boundaries stay low-contrast
_BASE_LO, _BASE_HI = 70.0, 180.0
_CHANNEL_FLOOR = 3  # keeps every foreground pixel eligible (non-black)


@dataclass
class SynthConfig:
    task: str = "shape"
    raster: int = 64
    train_per_class: int = 400
    val_per_class: int = 100
    n_points: int = 256
    cloud_dims: int = 3
    normalize_clouds: bool = True
    noise: float = 8.0
    seed: int = 0
    min_eligible: int = 300

    def __post_init__(self):
        if self.task not in TASKS:
            raise ContractError(f"unknown task {self.task!r} (choose from {TASKS})")
        if self.raster < 16:
            raise ContractError(f"raster must be >= 16, got {self.raster}")
        if self.train_per_class < 1 or self.val_per_class < 1:
            raise ContractError("need at least one sample per class per split")
        if self.min_eligible < self.n_points:
            raise ContractError("min_eligible must cover n_points so FPS never pads")


def _triangle(u: np.ndarray) -> np.ndarray:
    """Triangle wave with period 1 mapped to [0, 1]; uniform value marginal."""
    frac = u - np.floor(u)
    return 1.0 - 2.0 * np.abs(frac - 0.5)


def _blob_mask(raster: int, rng, spiky: bool) -> np.ndarray:
    cx = raster / 2.0 + rng.uniform(-0.05, 0.05) * raster
    cy = raster / 2.0 + rng.uniform(-0.05, 0.05) * raster
    phase = rng.uniform(0.0, 2.0 * np.pi)
    yy, xx = np.mgrid[0:raster, 0:raster]
    dx = xx - cx
    dy = yy - cy
    theta = np.arctan2(dy, dx)
    rr = np.sqrt(dx * dx + dy * dy)
    if spiky:
        k = int(rng.integers(6, 10))
        amp = rng.uniform(0.38, 0.5)
        r0 = rng.uniform(0.22, 0.28) * raster
        # match the smooth class's expected area: E[r^2] grows by 1 + amp^2/2
        r0 /= np.sqrt(1.0 + amp * amp / 2.0)
        radius = r0 * (1.0 + amp * np.cos(k * theta + phase))
    else:
        a1 = rng.uniform(0.04, 0.14)
        a2 = rng.uniform(0.03, 0.10)
        phase2 = rng.uniform(0.0, 2.0 * np.pi)
        r0 = rng.uniform(0.26, 0.34) * raster
        radius = r0 * (1.0 + a1 * np.sin(2.0 * theta + phase) + a2 * np.sin(3.0 * theta + phase2))
    return rr <= radius


def _clip_colors(values: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(values), _CHANNEL_FLOOR, 255).astype(np.uint8)


def _mean_field(raster: int, rng, high_freq: bool) -> np.ndarray:
    """Horizontal triangle-wave intensity field in [-1, 1]."""
    period = raster / 4.0 if high_freq else float(raster)
    phase = rng.uniform(0.0, 1.0)
    xs = np.arange(raster, dtype=np.float64)
    t = _triangle(xs / period + phase)
    return np.broadcast_to(2.0 * t - 1.0, (raster, raster))


def _foreground(task: str, label: int, mask: np.ndarray, base: np.ndarray, noise: float, rng) -> np.ndarray:
    n = int(mask.sum())
    raster = mask.shape[0]
    if task == "texture":
        sigma = noise if label == 0 else noise * 3.5
        colors = base + rng.normal(0.0, sigma, size=(n, 3))
    elif task == "zsignal":
        field = _mean_field(raster, rng, high_freq=label == 1)
        amp = 55.0
        offsets = amp * field[mask][:, None]
        colors = base + offsets + rng.normal(0.0, 6.0, size=(n, 3))
    else:  # shape: identical color law for both classes
        colors = base + rng.normal(0.0, noise, size=(n, 3))
    return _clip_colors(colors)


def _background(task: str, raster: int, base: np.ndarray, noise: float, rng) -> np.ndarray:
    # paper-like background: same base hue as the foreground plus a small shift
    bg_base = np.clip(base + rng.normal(0.0, 8.0, size=3), _BASE_LO, _BASE_HI)
    img = bg_base + rng.normal(0.0, noise, size=(raster, raster, 3))
    if task == "zsignal":
        field = _mean_field(raster, rng, high_freq=bool(rng.integers(2)))
        img += 55.0 * field[:, :, None]
    # clutter: bars and patches, class-uncorrelated
    for _ in range(int(rng.integers(3, 8))):
        bar = rng.random() < 0.5
        if bar:
            w = int(rng.integers(raster // 2, raster))
            h = int(rng.integers(2, max(3, raster // 12)))
        else:
            w = int(rng.integers(raster // 8, raster // 3))
            h = int(rng.integers(raster // 8, raster // 3))
        if rng.random() < 0.5:
            w, h = h, w
        x0 = int(rng.integers(0, max(1, raster - w)))
        y0 = int(rng.integers(0, max(1, raster - h)))
        patch_base = rng.uniform(_BASE_LO, _BASE_HI, size=3)
        patch = patch_base + rng.normal(0.0, noise, size=(h, w, 3))
        if task == "zsignal":
            field = _mean_field(raster, rng, high_freq=bool(rng.integers(2)))
            patch += 55.0 * field[y0 : y0 + h, x0 : x0 + w][:, :, None]
        img[y0 : y0 + h, x0 : x0 + w] = patch
    return _clip_colors(img)


def render_sample(cfg: SynthConfig, label: int, sample_rng, base_color: np.ndarray) -> tuple[RgbImage, MaskImage]:
    """One raster + mask; retries the silhouette until the eligibility floor
    holds (tries are drawn from the same per-sample stream, so the result is
    deterministic)."""
    spiky = cfg.task == "shape" and label == 1
    for _ in range(32):
        mask = _blob_mask(cfg.raster, sample_rng, spiky)
        if int(mask.sum()) >= cfg.min_eligible:
            break
    else:
        raise DataError("could not render a silhouette above the eligibility floor")
    img = _background(cfg.task, cfg.raster, base_color, cfg.noise, sample_rng)
    fg = _foreground(cfg.task, label, mask, base_color, cfg.noise, sample_rng)
    img[mask] = fg
    return RgbImage(img), MaskImage(mask)


def generate(cfg: SynthConfig, out_dir) -> Manifest:
    """Write images, masks, clouds and a manifest; returns the manifest.

    Per-sample rng streams derive from (seed, split, index); the foreground
    base color derives from (seed, split, index) only — not the label — so the
    two classes see pairwise-identical base colors and texture statistics
    match by construction.
    """
    out_dir = Path(out_dir)
    for sub in ("images", "masks", "clouds"):
        (out_dir / sub).mkdir(parents=True, exist_ok=True)

    records = []
    for split_idx, (split, per_class) in enumerate((("train", cfg.train_per_class), ("val", cfg.val_per_class))):
        for i in range(per_class):
            base_rng = np.random.default_rng([cfg.seed, split_idx, i, 7])
            base_color = base_rng.uniform(_BASE_LO, _BASE_HI, size=3)
            for label in (0, 1):
                rng = np.random.default_rng([cfg.seed, split_idx, i, label])
                img, mask = render_sample(cfg, label, rng, base_color)
                sample_id = f"{split}_{label}_{i:05d}"
                image_rel = f"images/{sample_id}.png"
                mask_rel = f"masks/{sample_id}.png"
                cloud_rel = f"clouds/{sample_id}.simpc"
                save_image(img, out_dir / image_rel)
                save_mask(mask, out_dir / mask_rel)
                cloud = image_to_cloud(apply_mask(img, mask), cfg.n_points, cfg.cloud_dims,
                                       normalize=cfg.normalize_clouds, provenance=sample_id)
                write_cloud(cloud, out_dir / cloud_rel)
                records.append(SampleRecord(sample_id, image_rel, mask_rel, cloud_rel, label, split))

    manifest_path = out_dir / "manifest.jsonl"
    write_manifest(records, manifest_path)
    if cfg.task == "shape":
        _check_texture_match(records, out_dir)
    return Manifest(records=records, base_dir=out_dir)


def _check_texture_match(records, out_dir, tolerance: float = 0.02):
    """Generation-time guard: foreground color mean/std must match across
    classes (only meaningful with a few hundred samples)."""
    from ..images import load_image, load_mask

    per_class = {0: [], 1: []}
    for rec in records:
        if rec.split != "train":
            continue
        img = load_image(Path(out_dir) / rec.image)
        mask = load_mask(Path(out_dir) / rec.mask)
        per_class[rec.label].append(img.data[mask.data].astype(np.float64))
    if min(len(v) for v in per_class.values()) < 100:
        return
    stats = {}
    for label, chunks in per_class.items():
        pixels = np.concatenate(chunks, axis=0)
        stats[label] = (pixels.mean(), pixels.std())
    mean_gap = abs(stats[0][0] - stats[1][0]) / stats[0][0]
    std_gap = abs(stats[0][1] - stats[1][1]) / stats[0][1]
    if mean_gap > tolerance or std_gap > tolerance:
        raise DataError(
            f"shape task texture drifted between classes: mean gap {mean_gap:.3%}, std gap {std_gap:.3%}"
        )
