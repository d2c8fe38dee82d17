"""Seeded BSRGAN-style degradation pipeline producing x4 LR images from GT.

Recipes are fully deterministic functions of (seed, severity) and serialize
to canonical JSON, so any LR file can be reproduced bit-exactly from its
sidecar recipe and the GT image.
"""

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import imgcore
from .imgcore import ImageBuffer

__all__ = [
    "DegradationRecipe",
    "SEVERITY_RANGES",
    "SCALE",
    "STAGES",
    "sample_recipe",
    "apply_degradation",
    "prepare_gt",
]

SCALE = 4
STAGES = ("blur", "resize", "noise", "jpeg")
RESIZE_KERNELS = ("nearest", "bilinear", "bicubic")
ANISOTROPIC_PROB = 0.3

# Nested sub-ranges: mild is a subset of medium is a subset of severe.
# For JPEG, harsher degradation means lower quality, so severe reaches
# further down the quality scale.
SEVERITY_RANGES = {
    "mild": {"blur_sigma": (0.2, 1.0), "noise_sigma": (1.0, 9.0), "jpeg_quality": (73, 95)},
    "medium": {"blur_sigma": (0.2, 2.0), "noise_sigma": (1.0, 17.0), "jpeg_quality": (52, 95)},
    "severe": {"blur_sigma": (0.2, 3.0), "noise_sigma": (1.0, 25.0), "jpeg_quality": (30, 95)},
}

_FULL = SEVERITY_RANGES["severe"]


@dataclass(frozen=True)
class DegradationRecipe:
    """One LR synthesis, fully parameterized and seeded."""

    seed: int
    stage_order: tuple
    blur_sigma: float
    blur_kind: str  # "isotropic" | "anisotropic"
    resize_kernel: str
    noise_sigma: float
    jpeg_quality: int
    scale: int = SCALE
    # anisotropic blur parameters; None for isotropic recipes
    blur_sigma_x: float | None = None
    blur_sigma_y: float | None = None
    blur_angle: float | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if sorted(self.stage_order) != sorted(STAGES):
            raise ValueError(f"stage_order must be a permutation of {STAGES}, got {self.stage_order}")
        if self.scale != SCALE:
            raise ValueError(f"scale is fixed at {SCALE}, got {self.scale}")
        if not _FULL["blur_sigma"][0] <= self.blur_sigma <= _FULL["blur_sigma"][1]:
            raise ValueError(f"blur_sigma {self.blur_sigma} outside {_FULL['blur_sigma']}")
        if not _FULL["noise_sigma"][0] <= self.noise_sigma <= _FULL["noise_sigma"][1]:
            raise ValueError(f"noise_sigma {self.noise_sigma} outside {_FULL['noise_sigma']}")
        if not _FULL["jpeg_quality"][0] <= self.jpeg_quality <= _FULL["jpeg_quality"][1]:
            raise ValueError(f"jpeg_quality {self.jpeg_quality} outside {_FULL['jpeg_quality']}")
        if self.resize_kernel not in RESIZE_KERNELS:
            raise ValueError(f"unknown resize kernel {self.resize_kernel!r}")
        if self.blur_kind == "anisotropic":
            if None in (self.blur_sigma_x, self.blur_sigma_y, self.blur_angle):
                raise ValueError("anisotropic blur requires sigma_x, sigma_y and angle")
        elif self.blur_kind == "isotropic":
            if (self.blur_sigma_x, self.blur_sigma_y, self.blur_angle) != (None, None, None):
                raise ValueError("isotropic blur must not carry anisotropic parameters")
        else:
            raise ValueError(f"unknown blur kind {self.blur_kind!r}")
        object.__setattr__(self, "stage_order", tuple(self.stage_order))

    def to_json(self) -> str:
        if self.blur_kind == "anisotropic":
            kind = {
                "sigma_x": self.blur_sigma_x,
                "sigma_y": self.blur_sigma_y,
                "angle": self.blur_angle,
            }
        else:
            kind = "isotropic"
        record = {
            "seed": self.seed,
            "stage_order": list(self.stage_order),
            "blur_sigma": self.blur_sigma,
            "blur_kind": kind,
            "resize_kernel": self.resize_kernel,
            "scale": self.scale,
            "noise_sigma": self.noise_sigma,
            "jpeg_quality": self.jpeg_quality,
        }
        return json.dumps(record, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "DegradationRecipe":
        record = json.loads(text)
        kind = record["blur_kind"]
        if kind == "isotropic":
            aniso = {}
            kind_name = "isotropic"
        else:
            aniso = {
                "blur_sigma_x": kind["sigma_x"],
                "blur_sigma_y": kind["sigma_y"],
                "blur_angle": kind["angle"],
            }
            kind_name = "anisotropic"
        return cls(
            seed=record["seed"],
            stage_order=tuple(record["stage_order"]),
            blur_sigma=record["blur_sigma"],
            blur_kind=kind_name,
            resize_kernel=record["resize_kernel"],
            noise_sigma=record["noise_sigma"],
            jpeg_quality=record["jpeg_quality"],
            scale=record["scale"],
            **aniso,
        )


def sample_recipe(seed: int, severity: str) -> DegradationRecipe:
    """Deterministically draw a recipe for (seed, severity).

    Stage order is a uniform random permutation; parameters are uniform
    over the severity sub-ranges in SEVERITY_RANGES.
    """
    if severity not in SEVERITY_RANGES:
        raise ValueError(f"severity must be one of {sorted(SEVERITY_RANGES)}, got {severity!r}")
    ranges = SEVERITY_RANGES[severity]
    rng = np.random.default_rng(seed)

    order = tuple(STAGES[i] for i in rng.permutation(len(STAGES)))
    blur_sigma = float(rng.uniform(*ranges["blur_sigma"]))
    aniso = {}
    kind = "isotropic"
    if rng.random() < ANISOTROPIC_PROB:
        kind = "anisotropic"
        aniso = {
            "blur_sigma_x": float(rng.uniform(*ranges["blur_sigma"])),
            "blur_sigma_y": float(rng.uniform(*ranges["blur_sigma"])),
            "blur_angle": float(rng.uniform(0.0, math.pi)),
        }
    kernel = RESIZE_KERNELS[rng.integers(len(RESIZE_KERNELS))]
    noise_sigma = float(rng.uniform(*ranges["noise_sigma"]))
    lo_q, hi_q = ranges["jpeg_quality"]
    quality = int(rng.integers(lo_q, hi_q + 1))

    return DegradationRecipe(
        seed=seed,
        stage_order=order,
        blur_sigma=blur_sigma,
        blur_kind=kind,
        resize_kernel=kernel,
        noise_sigma=noise_sigma,
        jpeg_quality=quality,
        **aniso,
    )


def prepare_gt(img: ImageBuffer) -> ImageBuffer:
    """Center-crop to the largest width/height multiples of 4."""
    if img.width < 8 or img.height < 8:
        raise ValueError(f"GT must be at least 8x8, got {img.width}x{img.height}")
    w = img.width - img.width % SCALE
    h = img.height - img.height % SCALE
    if w == img.width and h == img.height:
        return img
    x0 = (img.width - w) // 2
    y0 = (img.height - h) // 2
    return ImageBuffer.from_array(img.data[y0 : y0 + h, x0 : x0 + w])


def _anisotropic_kernel(sigma_x: float, sigma_y: float, angle: float) -> np.ndarray:
    # Covariance of the rotated Gaussian; kernel truncated at 3 sigma.
    c, s = math.cos(angle), math.sin(angle)
    rot = np.array([[c, -s], [s, c]])
    cov = rot @ np.diag([sigma_x**2, sigma_y**2]) @ rot.T
    radius = math.ceil(3.0 * max(sigma_x, sigma_y))
    ax = np.arange(-radius, radius + 1, dtype=np.float64)
    xx, yy = np.meshgrid(ax, ax)  # xx varies along columns, yy along rows
    pts = np.stack([xx, yy], axis=-1)
    inv = np.linalg.inv(cov)
    quad = np.einsum("...i,ij,...j->...", pts, inv, pts)
    k = np.exp(-0.5 * quad)
    return k / k.sum()


def _blur_stage(arr: np.ndarray, recipe: DegradationRecipe) -> np.ndarray:
    if recipe.blur_kind == "isotropic":
        out = np.empty_like(arr)
        for c in range(arr.shape[2]):
            out[:, :, c] = imgcore.blur_array(arr[:, :, c], recipe.blur_sigma)
        return out
    k = _anisotropic_kernel(recipe.blur_sigma_x, recipe.blur_sigma_y, recipe.blur_angle)
    out = np.empty_like(arr)
    for c in range(arr.shape[2]):
        out[:, :, c] = ndimage.correlate(arr[:, :, c], k, mode="reflect")
    return out


def apply_degradation(gt: ImageBuffer, recipe: DegradationRecipe) -> ImageBuffer:
    """Run the recipe's stages in order; output dimensions are GT/4.

    Bit-identical across runs for identical (gt, recipe): the noise stage
    draws from a generator seeded with recipe.seed, local to this call.
    """
    if gt.width < 8 or gt.height < 8:
        raise ValueError(f"GT must be at least 8x8, got {gt.width}x{gt.height}")
    if gt.width % SCALE or gt.height % SCALE:
        raise ValueError("GT dimensions must be divisible by 4; run prepare_gt first")

    rng = np.random.default_rng(recipe.seed)
    if gt.channels == 1:
        arr = np.repeat(gt.data.astype(np.float64), 3, axis=2)
    else:
        arr = gt.data.astype(np.float64)

    for stage in recipe.stage_order:
        if stage == "blur":
            arr = _blur_stage(arr, recipe)
        elif stage == "resize":
            arr = imgcore.resample_array(
                arr, arr.shape[1] // SCALE, arr.shape[0] // SCALE, recipe.resize_kernel
            )
        elif stage == "noise":
            arr = imgcore.noise_array(arr, recipe.noise_sigma, rng)
        elif stage == "jpeg":
            quantized = ImageBuffer.from_array(np.rint(np.clip(arr, 0, 255)).astype(np.uint8))
            arr = imgcore.jpeg_roundtrip(quantized, recipe.jpeg_quality).data.astype(np.float64)

    return ImageBuffer.from_array(np.rint(np.clip(arr, 0, 255)).astype(np.uint8))
