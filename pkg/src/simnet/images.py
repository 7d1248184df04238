"""Image and mask I/O, mask application, augmentation, and the color-coded
coordinate mask (CCM) encoding.

Supported file formats are 8-bit RGB PNG and binary PPM (P6); both round-trip
losslessly.  Coordinate convention throughout: x is the column index, y the
row index, origin at the top-left.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from PIL import Image as _PILImage

from .errors import DimensionError, FormatError, SimNetError


@dataclass
class RgbImage:
    """H x W x 3 byte raster."""

    data: np.ndarray  # uint8, shape (H, W, 3)

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.uint8)
        if self.data.ndim != 3 or self.data.shape[2] != 3:
            raise DimensionError("RgbImage wants (H, W, 3)", self.data.shape, None)
        if self.data.shape[0] < 1 or self.data.shape[1] < 1:
            raise DimensionError("RgbImage raster must be at least 1x1", self.data.shape, None)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class MaskImage:
    """Boolean foreground raster matching a companion image."""

    data: np.ndarray  # bool, shape (H, W)

    def __post_init__(self):
        self.data = np.asarray(self.data).astype(bool)
        if self.data.ndim != 2:
            raise DimensionError("MaskImage wants (H, W)", self.data.shape, None)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass
class CcmImage(RgbImage):
    """Color-coded coordinate mask: R' encodes x, G' encodes y, B' the mean
    intensity of the source pixel; background stays (0, 0, 0)."""


# -- file I/O -------------------------------------------------------------------

_PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _validate_png_header(blob: bytes, path):
    # IHDR layout: signature(8) len(4) 'IHDR'(4) w(4) h(4) bitdepth(1) colortype(1)
    if len(blob) < 26 or blob[12:16] != b"IHDR":
        raise FormatError(f"{path}: truncated PNG header")
    bit_depth = blob[24]
    color_type = blob[25]
    if bit_depth != 8:
        raise FormatError(f"{path}: unsupported PNG bit depth {bit_depth} (need 8)")
    if color_type != 2:
        raise FormatError(f"{path}: unsupported PNG color type {color_type} (need 2, truecolor RGB)")


def _read_ppm(blob: bytes, path) -> np.ndarray:
    pos = 2  # past "P6"
    fields = []
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if pos < len(blob) and blob[pos : pos + 1] == b"#":
            while pos < len(blob) and blob[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated PPM header")
        fields.append(blob[start:pos])
    pos += 1  # single whitespace after maxval
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise FormatError(f"{path}: malformed PPM header") from None
    if maxval != 255:
        raise FormatError(f"{path}: PPM maxval {maxval} unsupported (need 255)")
    n = width * height * 3
    raw = blob[pos : pos + n]
    if len(raw) != n:
        raise FormatError(f"{path}: PPM pixel data truncated ({len(raw)} of {n} bytes)")
    return np.frombuffer(raw, dtype=np.uint8).reshape(height, width, 3).copy()


def load_image(path) -> RgbImage:
    """Read an 8-bit RGB PNG or binary PPM (P6)."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise SimNetError(f"cannot read {path}: {exc}") from exc
    if blob[:2] == b"P6":
        return RgbImage(_read_ppm(blob, path))
    if blob[: len(_PNG_SIGNATURE)] == _PNG_SIGNATURE:
        _validate_png_header(blob, path)
        try:
            with _PILImage.open(io.BytesIO(blob)) as im:
                arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
        except Exception as exc:
            raise FormatError(f"{path}: PNG decode failed ({exc})") from exc
        return RgbImage(arr)
    raise FormatError(f"{path}: not a PNG or PPM P6 file")


def save_image(img: RgbImage, path):
    path = str(path)
    if path.endswith(".ppm"):
        header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(np.ascontiguousarray(img.data).tobytes())
    else:
        _PILImage.fromarray(img.data, mode="RGB").save(path, format="PNG")


def load_mask(path) -> MaskImage:
    """A mask file is any supported image; foreground = any nonzero channel."""
    img = load_image(path)
    return MaskImage(img.data.any(axis=2))


def save_mask(mask: MaskImage, path):
    raster = np.where(mask.data[:, :, None], np.uint8(255), np.uint8(0))
    save_image(RgbImage(np.repeat(raster, 3, axis=2)), path)


# -- mask application and augmentation --------------------------------------------


def apply_mask(img: RgbImage, mask: MaskImage) -> RgbImage:
    """Zero out background: non-foreground pixels become (0, 0, 0)."""
    if (img.height, img.width) != (mask.height, mask.width):
        raise DimensionError("image/mask size mismatch", img.data.shape[:2], mask.data.shape)
    out = img.data.copy()
    out[~mask.data] = 0
    return RgbImage(out)


def flip_horizontal(img: RgbImage) -> RgbImage:
    return RgbImage(img.data[:, ::-1])


def flip_vertical(img: RgbImage) -> RgbImage:
    return RgbImage(img.data[::-1, :])


def rotate90(img: RgbImage) -> RgbImage:
    """Quarter-turn counterclockwise; swaps the raster dimensions."""
    return RgbImage(np.rot90(img.data, k=1, axes=(0, 1)))


def augment_image(img: RgbImage, rng) -> RgbImage:
    """Randomly apply horizontal flip, vertical flip, and a 90-degree rotation,
    each independently with probability 0.5."""
    out = img
    if rng.random() < 0.5:
        out = flip_horizontal(out)
    if rng.random() < 0.5:
        out = flip_vertical(out)
    if rng.random() < 0.5:
        out = rotate90(out)
    return out


def resize(img: RgbImage, width: int, height: int, method: str = "bilinear") -> RgbImage:
    """Resample to (height, width); nearest or bilinear only."""
    if (img.width, img.height) == (width, height):
        return img
    src = img.data.astype(np.float32)
    if method == "nearest":
        ys = np.minimum((np.arange(height) + 0.5) * img.height / height, img.height - 1).astype(int)
        xs = np.minimum((np.arange(width) + 0.5) * img.width / width, img.width - 1).astype(int)
        out = src[ys][:, xs]
    elif method == "bilinear":
        ys = (np.arange(height) + 0.5) * img.height / height - 0.5
        xs = (np.arange(width) + 0.5) * img.width / width - 0.5
        y0 = np.clip(np.floor(ys).astype(int), 0, img.height - 1)
        x0 = np.clip(np.floor(xs).astype(int), 0, img.width - 1)
        y1 = np.minimum(y0 + 1, img.height - 1)
        x1 = np.minimum(x0 + 1, img.width - 1)
        wy = np.clip(ys - y0, 0.0, 1.0)[:, None, None]
        wx = np.clip(xs - x0, 0.0, 1.0)[None, :, None]
        top = src[y0][:, x0] * (1 - wx) + src[y0][:, x1] * wx
        bot = src[y1][:, x0] * (1 - wx) + src[y1][:, x1] * wx
        out = top * (1 - wy) + bot * wy
    else:
        raise SimNetError(f"unknown resize method {method!r}")
    return RgbImage(np.clip(np.rint(out), 0, 255).astype(np.uint8))


# -- color-coded coordinate masks ---------------------------------------------------


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def encode_ccm(img: RgbImage) -> CcmImage:
    """Re-encode a masked image: for each non-black pixel at (x, y) write
    R' = round(x * 255 / (W-1)), G' = round(y * 255 / (H-1)) and B' = the
    rounded channel mean.  Black pixels stay (0, 0, 0).

    B' is floored at 1 so a foreground pixel can never collapse to black;
    this only bites colors with channel sum < 2.
    """
    h, w = img.height, img.width
    if w < 2 or h < 2:
        raise DimensionError("CCM encoding needs at least a 2x2 raster", (h, w), None)
    fg = img.data.any(axis=2)
    ys, xs = np.nonzero(fg)
    out = np.zeros_like(img.data)
    r = _round_half_up(xs * 255.0 / (w - 1))
    g = _round_half_up(ys * 255.0 / (h - 1))
    b = np.maximum(_round_half_up(img.data[ys, xs].astype(np.float64).mean(axis=1)), 1.0)
    out[ys, xs, 0] = r.astype(np.uint8)
    out[ys, xs, 1] = g.astype(np.uint8)
    out[ys, xs, 2] = b.astype(np.uint8)
    return CcmImage(out)


def decode_ccm(ccm: CcmImage, width: int, height: int) -> list[tuple[int, int, float]]:
    """Invert ``encode_ccm`` per non-black pixel, returning (x, y, mean intensity).

    Recovery of (x, y) is exact when both raster dimensions are <= 256.
    """
    fg = ccm.data.any(axis=2)
    ys, xs = np.nonzero(fg)
    r = ccm.data[ys, xs, 0].astype(np.float64)
    g = ccm.data[ys, xs, 1].astype(np.float64)
    b = ccm.data[ys, xs, 2].astype(np.float64)
    x_rec = _round_half_up(r * (width - 1) / 255.0).astype(int)
    y_rec = _round_half_up(g * (height - 1) / 255.0).astype(int)
    return [(int(x), int(y), float(m)) for x, y, m in zip(x_rec, y_rec, b)]
