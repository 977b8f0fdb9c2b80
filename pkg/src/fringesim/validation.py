"""Input validation helpers shared by the public entry points.

Images are plain numpy arrays in linear-light intensity units: ``(H, W)``
for grayscale or ``(H, W, 3)`` for color, dtype float, every pixel finite
and non-negative. Codecs quantize on save; nothing in the processing chain
clamps to a display range.
"""

from __future__ import annotations

import numpy as np


def check_image(image, name: str = "image") -> np.ndarray:
    """Coerce to a float64 array and enforce the image invariants."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim not in (2, 3):
        raise ValueError(f"{name} must be 2-D or 3-D, got shape {arr.shape}")
    if arr.ndim == 3 and arr.shape[2] != 3:
        raise ValueError(f"{name} must have 1 or 3 channels, got {arr.shape[2]}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} has empty dimensions: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite pixels")
    if arr.min() < 0:
        raise ValueError(f"{name} contains negative pixels")
    return arr


def luminance(image: np.ndarray) -> np.ndarray:
    """Per-pixel luminance: the image itself if gray, channel mean if color."""
    if image.ndim == 2:
        return image
    return image.mean(axis=2)


def row_luminance_profile(image: np.ndarray) -> np.ndarray:
    """Column-averaged row luminance, one value per sensor row."""
    return luminance(image).mean(axis=1)


def check_fraction(value, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


def check_positive(value, name: str) -> float:
    value = float(value)
    if not value > 0.0:
        raise ValueError(f"{name} must be > 0, got {value}")
    return value


def check_band(band, rows: int) -> tuple[int, int]:
    """Resolve a row band to half-open integer bounds inside ``[0, rows)``.

    Integer pairs are taken as row indices, float pairs in [0, 1] as
    fractions of the image height.
    """
    lo, hi = band
    if isinstance(lo, float) or isinstance(hi, float):
        lo = int(round(float(lo) * rows)) if isinstance(lo, float) else int(lo)
        hi = int(round(float(hi) * rows)) if isinstance(hi, float) else int(hi)
    lo, hi = int(lo), int(hi)
    if not (0 <= lo < hi <= rows):
        raise ValueError(f"band {band!r} is empty or outside image rows [0, {rows})")
    return lo, hi


def as_rng(seed) -> np.random.Generator:
    """Accept None, an int seed, or a Generator."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
