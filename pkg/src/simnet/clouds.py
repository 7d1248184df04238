"""Masked image -> 3D point cloud transformation.

Pipeline order: collect eligible (non-black) pixels, downsample with greedy
farthest point sampling in 2D, then lift each survivor to 3D by assigning
z = (r + g + b) / 3.  Clouds can optionally be enriched with raw RGB columns
(6-D) and normalized to the unit disk / [-1, 1] range.

On-disk format SIMPC1: magic "SIMPC1", version byte, dims byte (3|6),
u32-LE point count, normalized-flag byte, then m*dims little-endian float32,
row-major.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, DimensionError, EmptyForegroundError, FormatError
from .images import RgbImage

CLOUD_MAGIC = b"SIMPC1"
CLOUD_VERSION = 1


@dataclass
class EligiblePixelSet:
    """Non-black pixels of a masked image, in row-major scan order."""

    xy: np.ndarray      # (n, 2) int32 columns (x, y)
    colors: np.ndarray  # (n, 3) uint8 (r, g, b)
    width: int
    height: int

    def __len__(self) -> int:
        return self.xy.shape[0]


@dataclass
class PointCloud:
    coords: np.ndarray        # (m, dims) float32, dims in {3, 6}
    normalized: bool = False
    provenance: str = ""
    padded: bool = False      # true when FPS had to cycle-pad a small input

    def __post_init__(self):
        self.coords = np.asarray(self.coords, dtype=np.float32)
        if self.coords.ndim != 2 or self.coords.shape[1] not in (3, 6):
            raise DimensionError("PointCloud wants (m, 3|6)", self.coords.shape, None)

    @property
    def m(self) -> int:
        return self.coords.shape[0]

    @property
    def dims(self) -> int:
        return self.coords.shape[1]


def extract_eligible(img: RgbImage) -> EligiblePixelSet:
    """Every pixel with color != (0, 0, 0), scanned row by row."""
    fg = img.data.any(axis=2)
    ys, xs = np.nonzero(fg)  # row-major order
    if xs.size == 0:
        raise EmptyForegroundError("image has no eligible pixels after masking")
    xy = np.stack([xs, ys], axis=1).astype(np.int32)
    return EligiblePixelSet(xy=xy, colors=img.data[ys, xs], width=img.width, height=img.height)


# -- farthest point sampling -----------------------------------------------------


def _start_index(points: np.ndarray, rng=None) -> int:
    """Deterministic start: the point nearest the centroid (lowest index on
    ties); a seeded-random start when an rng is supplied."""
    if rng is not None:
        return int(rng.integers(points.shape[0]))
    centroid = points.mean(axis=0)
    d2 = ((points - centroid) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def fps(points, m: int, rng=None, start: int | None = None) -> tuple[np.ndarray, bool]:
    """Greedy farthest point sampling on 2D coordinates.

    Returns ``(indices, padded)``.  Each selected index maximizes the minimum
    squared Euclidean distance to the already-selected set; ties go to the
    lowest index.  Inputs smaller than ``m`` are exhausted in greedy order and
    then cycle-padded.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DimensionError("fps expects (n, 2) coordinates", pts.shape, None)
    n = pts.shape[0]
    if n == 0:
        raise EmptyForegroundError("fps on an empty point set")
    if m < 1:
        raise ContractError(f"fps target must be >= 1, got {m}")

    k = min(m, n)
    selected = np.empty(k, dtype=np.int64)
    selected[0] = _start_index(pts, rng) if start is None else start
    diff = pts - pts[selected[0]]
    min_d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
    for j in range(1, k):
        nxt = int(np.argmax(min_d2))  # argmax takes the lowest index on ties
        selected[j] = nxt
        diff = pts - pts[nxt]
        d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2
        np.minimum(min_d2, d2, out=min_d2)
    if k == m:
        return selected, False
    reps = np.resize(selected, m)  # cycle the greedy sequence to length m
    return reps, True


def fps_bruteforce(points, m: int, rng=None, start: int | None = None) -> np.ndarray:
    """O(n*m) reference oracle: recompute the argmax-min from scratch each step.

    Kept deliberately independent of ``fps`` (no shared running state) so the
    two can cross-check each other, tie-breaks included.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if n == 0:
        raise EmptyForegroundError("fps on an empty point set")
    first = _start_index(pts, rng) if start is None else start
    chosen = [first]
    while len(chosen) < min(m, n):
        best_idx = -1
        best_d2 = -1.0
        for i in range(n):
            d2_min = min((pts[i, 0] - pts[j, 0]) ** 2 + (pts[i, 1] - pts[j, 1]) ** 2 for j in chosen)
            if d2_min > best_d2:
                best_d2 = d2_min
                best_idx = i
        chosen.append(best_idx)
    k = len(chosen)
    while len(chosen) < m:  # cycle-pad undersized inputs, like fps does
        chosen.append(chosen[len(chosen) % k])
    return np.asarray(chosen, dtype=np.int64)


def coverage_radius(points, selected_indices) -> float:
    """Max over all points of the distance to the nearest selected point."""
    pts = np.asarray(points, dtype=np.float64)
    sel = pts[np.asarray(selected_indices)]
    d2 = ((pts[:, None, :] - sel[None, :, :]) ** 2).sum(axis=2)
    return float(np.sqrt(d2.min(axis=1).max()))


# -- lifting and enrichment --------------------------------------------------------


def lift_to_3d(pixels: EligiblePixelSet, indices) -> PointCloud:
    """p = (x, y, (r + g + b) / 3); z stays a real, never rounded."""
    idx = np.asarray(indices)
    xy = pixels.xy[idx].astype(np.float32)
    z = pixels.colors[idx].astype(np.float32).sum(axis=1) / 3.0
    return PointCloud(np.column_stack([xy, z]))


def enrich_rgb(cloud: PointCloud, pixels: EligiblePixelSet, indices) -> PointCloud:
    """Append the raw (r, g, b) of each source pixel, giving 6-D points."""
    if cloud.dims != 3:
        raise ContractError(f"cloud is already {cloud.dims}-D; enrichment needs 3-D input")
    idx = np.asarray(indices)
    if idx.shape[0] != cloud.m:
        raise ContractError(f"cloud/pixel alignment mismatch: {cloud.m} vs {idx.shape[0]}")
    rgb = pixels.colors[idx].astype(np.float32)
    return PointCloud(
        np.column_stack([cloud.coords, rgb]),
        normalized=cloud.normalized,
        provenance=cloud.provenance,
        padded=cloud.padded,
    )


def normalize_cloud(cloud: PointCloud) -> PointCloud:
    """Center (x, y) on the centroid and scale into the unit disk; map z and
    any color columns affinely from [0, 255] to [-1, 1]."""
    if cloud.normalized:
        raise ContractError("cloud is already normalized")
    coords = cloud.coords.astype(np.float64)
    xy = coords[:, :2]
    centroid = xy.mean(axis=0)
    centered = xy - centroid
    radius = np.sqrt((centered**2).sum(axis=1)).max()
    if radius == 0.0:
        radius = 1.0  # single point / degenerate cloud: leave scale alone
    out = coords.copy()
    out[:, :2] = centered / radius
    out[:, 2:] = coords[:, 2:] / 127.5 - 1.0
    return PointCloud(out.astype(np.float32), normalized=True,
                      provenance=cloud.provenance, padded=cloud.padded)


def augment_cloud(cloud: PointCloud, rng, jitter_sigma: float = 0.02, jitter_clip: float = 0.05) -> PointCloud:
    """Rotate (x, y) by a uniform angle, then add clipped Gaussian jitter to
    the first three dimensions."""
    coords = cloud.coords.copy()
    theta = rng.uniform(0.0, 2.0 * np.pi)
    c, s = np.cos(theta), np.sin(theta)
    x, y = coords[:, 0].copy(), coords[:, 1].copy()
    coords[:, 0] = c * x - s * y
    coords[:, 1] = s * x + c * y
    if jitter_sigma > 0.0:
        noise = np.clip(rng.normal(0.0, jitter_sigma, size=(cloud.m, 3)), -jitter_clip, jitter_clip)
        coords[:, :3] += noise.astype(np.float32)
    return PointCloud(coords, normalized=cloud.normalized,
                      provenance=cloud.provenance, padded=cloud.padded)


def ablate_points(cloud: PointCloud, keep_fraction: float, rng) -> PointCloud:
    """Keep round(m * keep_fraction) points, sampled uniformly without
    replacement."""
    if not 0.0 < keep_fraction <= 1.0:
        raise ContractError(f"keep_fraction must be in (0, 1], got {keep_fraction}")
    kept = int(np.floor(cloud.m * keep_fraction + 0.5))
    if kept < 1:
        raise ContractError(f"keep_fraction {keep_fraction} keeps zero of {cloud.m} points")
    idx = rng.choice(cloud.m, size=kept, replace=False)
    return PointCloud(cloud.coords[idx], normalized=cloud.normalized,
                      provenance=cloud.provenance, padded=cloud.padded)


def zero_z(cloud: PointCloud) -> PointCloud:
    """Erase the z column; x, y and any color columns are untouched."""
    coords = cloud.coords.copy()
    coords[:, 2] = 0.0
    return PointCloud(coords, normalized=cloud.normalized,
                      provenance=cloud.provenance, padded=cloud.padded)


def image_to_cloud(img: RgbImage, m: int, dims: int = 3, normalize: bool = True,
                   rng=None, provenance: str = "") -> PointCloud:
    """Full pipeline on an already-masked image: eligibility, FPS, z-lift,
    optional RGB enrichment, optional normalization."""
    if dims not in (3, 6):
        raise ContractError(f"cloud dims must be 3 or 6, got {dims}")
    pixels = extract_eligible(img)
    indices, padded = fps(pixels.xy, m, rng=rng)
    cloud = lift_to_3d(pixels, indices)
    if dims == 6:
        cloud = enrich_rgb(cloud, pixels, indices)
    cloud.provenance = provenance
    cloud.padded = padded
    if normalize:
        cloud = normalize_cloud(cloud)
    return cloud


# -- SIMPC1 file format -------------------------------------------------------------


def write_cloud(cloud: PointCloud, path):
    with open(path, "wb") as fh:
        fh.write(CLOUD_MAGIC)
        fh.write(struct.pack("<BBIB", CLOUD_VERSION, cloud.dims, cloud.m, int(cloud.normalized)))
        fh.write(np.ascontiguousarray(cloud.coords, dtype="<f4").tobytes())


def read_cloud(path) -> PointCloud:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[: len(CLOUD_MAGIC)] != CLOUD_MAGIC:
        raise FormatError(f"{path}: bad cloud magic")
    header_end = len(CLOUD_MAGIC) + struct.calcsize("<BBIB")
    if len(blob) < header_end:
        raise FormatError(f"{path}: truncated cloud header")
    version, dims, m, normalized = struct.unpack_from("<BBIB", blob, len(CLOUD_MAGIC))
    if version != CLOUD_VERSION:
        raise FormatError(f"{path}: unsupported cloud version {version}")
    if dims not in (3, 6):
        raise FormatError(f"{path}: dims byte must be 3 or 6, got {dims}")
    expected = header_end + 4 * m * dims
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    coords = np.frombuffer(blob, dtype="<f4", count=m * dims, offset=header_end).reshape(m, dims)
    return PointCloud(coords.copy(), normalized=bool(normalized))
