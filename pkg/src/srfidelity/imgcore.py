"""Image loading, color handling, resampling and filtering primitives.

All other modules operate on the two value types defined here: ``ImageBuffer``
(8-bit decoded raster, 1 or 3 channels) and ``LumaPlane`` (floating luminance
working representation in [0, 255]). Every operation is pure; buffers are
frozen after construction and safe to share across threads.
"""

import io
import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage

from .errors import ImageFormatError

__all__ = [
    "ImageBuffer",
    "LumaPlane",
    "load_image",
    "save_image",
    "to_luma",
    "resize",
    "gaussian_blur",
    "add_gaussian_noise",
]

# BT.601 luma weights, R/G/B order.
_LUMA_WEIGHTS = (0.299, 0.587, 0.114)


def _freeze(arr):
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ImageBuffer:
    """Decoded 8-bit raster image.

    ``data`` is a read-only (height, width, channels) uint8 array with
    channels in R, G, B order for 3-channel images.
    """

    width: int
    height: int
    channels: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image dimensions must be >= 1, got {self.width}x{self.height}")
        if self.channels not in (1, 3):
            raise ValueError(f"channels must be 1 or 3, got {self.channels}")
        data = np.ascontiguousarray(self.data, dtype=np.uint8)
        if data.size != self.width * self.height * self.channels:
            raise ValueError(
                f"data has {data.size} samples, expected "
                f"{self.width * self.height * self.channels}"
            )
        data = data.reshape(self.height, self.width, self.channels)
        object.__setattr__(self, "data", _freeze(data))

    @classmethod
    def from_array(cls, arr):
        """Build a buffer from a (h, w), (h, w, 1) or (h, w, 3) uint8 array."""
        arr = np.asarray(arr)
        if arr.dtype != np.uint8:
            raise ValueError(f"expected uint8 samples, got {arr.dtype}")
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"expected 2 or 3 dimensions, got {arr.ndim}")
        h, w, c = arr.shape
        return cls(width=w, height=h, channels=c, data=arr)


@dataclass(frozen=True)
class LumaPlane:
    """Row-major floating luminance samples in [0, 255]."""

    width: int
    height: int
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        data = np.ascontiguousarray(self.data, dtype=np.float64)
        if data.shape != (self.height, self.width):
            raise ValueError(f"data shape {data.shape} != ({self.height}, {self.width})")
        object.__setattr__(self, "data", _freeze(data))

    @classmethod
    def from_array(cls, arr):
        arr = np.asarray(arr, dtype=np.float64)
        return cls(width=arr.shape[1], height=arr.shape[0], data=arr)


# ---------------------------------------------------------------------------
# codec
# ---------------------------------------------------------------------------

def _decode(fp) -> ImageBuffer:
    try:
        pil = Image.open(fp)
        pil.load()
    except UnidentifiedImageError as exc:
        raise ImageFormatError(str(exc)) from exc
    except OSError as exc:
        # Pillow raises OSError for truncated streams it recognised.
        raise ImageFormatError(f"corrupt image data: {exc}") from exc

    if pil.mode in ("I;16", "I;16B", "I"):
        arr = np.asarray(pil, dtype=np.uint32)
        arr = (arr >> 8).astype(np.uint8)  # 16-bit -> 8-bit by integer right shift
        return ImageBuffer.from_array(arr)
    if pil.mode == "L":
        return ImageBuffer.from_array(np.asarray(pil, dtype=np.uint8))
    if pil.mode == "RGB":
        return ImageBuffer.from_array(np.asarray(pil, dtype=np.uint8))
    if pil.mode in ("P", "RGBA", "LA", "CMYK", "YCbCr"):
        # Palette and alpha variants are flattened to plain RGB.
        return ImageBuffer.from_array(np.asarray(pil.convert("RGB"), dtype=np.uint8))
    raise ImageFormatError(f"unsupported image mode {pil.mode!r}")


def _encode(img: ImageBuffer, fp, fmt: str, quality: int | None = None):
    arr = img.data[:, :, 0] if img.channels == 1 else img.data
    pil = Image.fromarray(arr)
    if fmt == "png":
        pil.save(fp, format="PNG")
    elif fmt == "jpeg":
        if quality is None:
            quality = 95
        if not 1 <= quality <= 100:
            raise ValueError(f"jpeg quality must be in [1, 100], got {quality}")
        pil.save(fp, format="JPEG", quality=quality)
    else:
        raise ValueError(f"unsupported format {fmt!r}")


def load_image(path) -> ImageBuffer:
    """Decode a PNG or JPEG file.

    16-bit PNG sources are rescaled to 8 bits by integer right shift.
    Raises OSError for unreadable files and ImageFormatError for
    undecodable ones.
    """
    with open(path, "rb") as fh:
        return _decode(fh)


def save_image(img: ImageBuffer, path, fmt: str = "png", quality: int | None = None):
    """Write ``img`` as PNG (lossless, round-trips bit-exactly) or JPEG."""
    with open(path, "wb") as fh:
        _encode(img, fh, fmt, quality)


def jpeg_roundtrip(img: ImageBuffer, quality: int) -> ImageBuffer:
    """Encode then decode through the JPEG codec, in memory.

    Same codec path as save_image/load_image; used by the degradation
    pipeline's compression stage.
    """
    buf = io.BytesIO()
    _encode(img, buf, "jpeg", quality)
    buf.seek(0)
    return _decode(buf)


# ---------------------------------------------------------------------------
# color
# ---------------------------------------------------------------------------

def to_luma(img: ImageBuffer) -> LumaPlane:
    """BT.601 luminance: Y = 0.299 R + 0.587 G + 0.114 B.

    1-channel input is copied to floating samples unchanged.
    """
    if img.channels == 1:
        plane = img.data[:, :, 0].astype(np.float64)
    else:
        wr, wg, wb = _LUMA_WEIGHTS
        d = img.data.astype(np.float64)
        plane = wr * d[:, :, 0] + wg * d[:, :, 1] + wb * d[:, :, 2]
    return LumaPlane.from_array(np.clip(plane, 0.0, 255.0))


# ---------------------------------------------------------------------------
# resampling
# ---------------------------------------------------------------------------

def _source_coords(n_dst: int, n_src: int) -> np.ndarray:
    # Center-aligned mapping: dst pixel centers land at (i + 0.5) * scale - 0.5.
    scale = n_src / n_dst
    return (np.arange(n_dst) + 0.5) * scale - 0.5


def _nearest_indices(coords: np.ndarray, n_src: int) -> np.ndarray:
    # Half-way ties resolve to the smaller index (top-left rule).
    idx = np.ceil(coords - 0.5).astype(np.int64)
    return np.clip(idx, 0, n_src - 1)


def _cubic_weight(t: np.ndarray, a: float = -0.5) -> np.ndarray:
    at = np.abs(t)
    w = np.where(
        at <= 1.0,
        (a + 2.0) * at**3 - (a + 3.0) * at**2 + 1.0,
        np.where(at < 2.0, a * at**3 - 5.0 * a * at**2 + 8.0 * a * at - 4.0 * a, 0.0),
    )
    return w


def _resample_axis(plane: np.ndarray, n_dst: int, kernel: str, axis: int) -> np.ndarray:
    plane = np.moveaxis(plane, axis, 0)
    n_src = plane.shape[0]
    coords = _source_coords(n_dst, n_src)

    if kernel == "nearest":
        out = plane[_nearest_indices(coords, n_src)]
    elif kernel == "bilinear":
        base = np.floor(coords).astype(np.int64)
        lo = np.clip(base, 0, n_src - 1)  # per-tap edge clamp, weights unchanged
        hi = np.clip(base + 1, 0, n_src - 1)
        shape = (n_dst,) + (1,) * (plane.ndim - 1)
        frac = (coords - base).reshape(shape)
        out = (1.0 - frac) * plane[lo] + frac * plane[hi]
    elif kernel == "bicubic":
        base = np.floor(coords).astype(np.int64)
        out = np.zeros((n_dst,) + plane.shape[1:], dtype=np.float64)
        shape = (n_dst,) + (1,) * (plane.ndim - 1)
        for tap in (-1, 0, 1, 2):
            idx = np.clip(base + tap, 0, n_src - 1)  # edge clamp
            w = _cubic_weight(coords - (base + tap)).reshape(shape)
            out += w * plane[idx]
    else:
        raise ValueError(f"unknown resize kernel {kernel!r}")

    return np.moveaxis(out, 0, axis)


def resample_array(arr: np.ndarray, new_width: int, new_height: int, kernel: str) -> np.ndarray:
    """Resample a (h, w) or (h, w, c) float array; output clamped to [0, 255]."""
    if new_width < 1 or new_height < 1:
        raise ValueError(f"target dimensions must be >= 1, got {new_width}x{new_height}")
    out = np.asarray(arr, dtype=np.float64)
    out = _resample_axis(out, new_height, kernel, axis=0)
    out = _resample_axis(out, new_width, kernel, axis=1)
    return np.clip(out, 0.0, 255.0)


def resize(img, new_width: int, new_height: int, kernel: str = "bicubic"):
    """Resample to new dimensions; returns the same type it was given.

    Kernels: nearest (tie -> smaller index), bilinear, and bicubic with the
    Catmull-Rom parameter a = -0.5 and edge clamping.
    """
    if isinstance(img, LumaPlane):
        out = resample_array(img.data, new_width, new_height, kernel)
        return LumaPlane.from_array(out)
    if isinstance(img, ImageBuffer):
        out = resample_array(img.data.astype(np.float64), new_width, new_height, kernel)
        return ImageBuffer.from_array(np.rint(out).astype(np.uint8))
    raise TypeError(f"expected LumaPlane or ImageBuffer, got {type(img).__name__}")


# ---------------------------------------------------------------------------
# filtering and noise
# ---------------------------------------------------------------------------

def gaussian_kernel_1d(sigma: float) -> np.ndarray:
    """Normalized 1-D Gaussian taps with radius ceil(3*sigma)."""
    if sigma <= 0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    radius = math.ceil(3.0 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2.0 * sigma**2))
    return k / k.sum()


def blur_array(arr: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with edge-repeating reflection padding."""
    k = gaussian_kernel_1d(sigma)
    out = np.asarray(arr, dtype=np.float64)
    out = ndimage.correlate1d(out, k, axis=0, mode="reflect")
    out = ndimage.correlate1d(out, k, axis=1, mode="reflect")
    return out


def gaussian_blur(img: LumaPlane, sigma: float) -> LumaPlane:
    """Gaussian-blur a luma plane; kernel normalized to sum 1."""
    return LumaPlane.from_array(np.clip(blur_array(img.data, sigma), 0.0, 255.0))


def noise_array(arr: np.ndarray, sigma: float, rng: np.random.Generator) -> np.ndarray:
    """Add i.i.d. zero-mean Gaussian noise per sample, clamped to [0, 255]."""
    if sigma < 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    out = np.asarray(arr, dtype=np.float64)
    if sigma == 0:
        return out.copy()
    return np.clip(out + rng.normal(0.0, sigma, size=out.shape), 0.0, 255.0)


def add_gaussian_noise(img: LumaPlane, sigma: float, rng: np.random.Generator) -> LumaPlane:
    """Perturb every sample with N(0, sigma^2) noise from the given generator."""
    return LumaPlane.from_array(noise_array(img.data, sigma, rng))
