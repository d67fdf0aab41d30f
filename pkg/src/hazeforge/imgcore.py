"""Image containers, channel access, sliding-window minimum and PNG I/O.

Images are plain ``numpy`` arrays: a *planar image* is ``(H, W, 3)`` RGB in
[0, 1], a *scalar field* is ``(H, W)``. Loaded images are float32; the
numerical stages promote to float64 where they need the headroom.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError
from scipy import ndimage


def as_image(img, *, clip: bool = False) -> np.ndarray:
    """Validate an ``(H, W, 3)`` array and return it as a float array."""
    arr = np.asarray(img)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected an (H, W, 3) image, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"image has a zero dimension: {arr.shape}")
    if not np.issubdtype(arr.dtype, np.floating):
        arr = arr.astype(np.float32)
    if not np.all(np.isfinite(arr)):
        raise ValueError("image contains non-finite values")
    if clip:
        arr = np.clip(arr, 0.0, 1.0)
    return arr


def as_field(field) -> np.ndarray:
    arr = np.asarray(field)
    if arr.ndim != 2:
        raise ValueError(f"expected an (H, W) scalar field, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"field has a zero dimension: {arr.shape}")
    return arr


def _check_patch(patch: int) -> int:
    if int(patch) != patch or patch < 1 or patch % 2 == 0:
        raise ValueError(f"patch must be an odd integer >= 1, got {patch!r}")
    return int(patch)


def min_filter(field, patch: int) -> np.ndarray:
    """Minimum over the ``patch x patch`` window centred on each pixel.

    Windows are clipped at the borders. Two 1-D passes are used; with
    ``nearest`` extension the padded samples duplicate a sample that is
    already inside the clipped window, so the result equals the
    shrunken-window minimum exactly.
    """
    arr = as_field(field)
    patch = _check_patch(patch)
    if patch == 1:
        return arr.copy()
    out = ndimage.minimum_filter1d(arr, patch, axis=0, mode="nearest")
    return ndimage.minimum_filter1d(out, patch, axis=1, mode="nearest")


def channel_min(img) -> np.ndarray:
    return as_image(img).min(axis=2)


def luminance_mean(img) -> np.ndarray:
    """Unweighted mean of R, G and B (the guide/intensity used by DCP)."""
    return as_image(img).mean(axis=2)


def box_mean(field, radius: int) -> np.ndarray:
    """Mean over the ``(2r+1)^2`` window, shrunk at the borders."""
    arr = np.asarray(as_field(field), dtype=np.float64)
    if radius < 0:
        raise ValueError("radius must be >= 0")
    summed = arr
    counts = []
    for axis in (0, 1):
        n = summed.shape[axis]
        csum = np.cumsum(summed, axis=axis)
        csum = np.concatenate(
            [np.zeros_like(np.take(csum, [0], axis=axis)), csum], axis=axis
        )
        idx = np.arange(n)
        hi = np.minimum(idx + radius + 1, n)
        lo = np.maximum(idx - radius, 0)
        summed = np.take(csum, hi, axis=axis) - np.take(csum, lo, axis=axis)
        counts.append((hi - lo).astype(np.float64))
    return summed / np.outer(counts[0], counts[1])


# -- file I/O ---------------------------------------------------------------


def load_image(path) -> np.ndarray:
    """Decode a PNG/JPEG into a float32 ``(H, W, 3)`` array in [0, 1].

    Alpha is dropped (not composited) and grayscale is replicated to RGB.
    """
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("RGBA", "LA", "PA") or (
                im.mode == "P" and "transparency" in im.info
            ):
                im = im.convert("RGBA")
                rgb = np.asarray(im, dtype=np.uint8)[..., :3]
            else:
                rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise OSError(f"cannot decode image {path}: {exc}") from exc
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise ValueError(f"image {path} has a zero dimension")
    return rgb.astype(np.float32) / np.float32(255.0)


def quantize(values) -> np.ndarray:
    """Clamp to [0, 1] and map to uint8 with round-half-away-from-zero."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0) * 255.0
    # values are non-negative here, so floor(x + 0.5) rounds half away from zero
    return np.floor(v + 0.5).astype(np.uint8)


def save_image(img, path) -> None:
    data = quantize(as_image(img))
    _write_png(Image.fromarray(data), path)


def save_field(field, path) -> None:
    """Write a scalar field (e.g. a transmission map) as 8-bit grayscale."""
    data = quantize(as_field(field))
    _write_png(Image.fromarray(data), path)


def _write_png(im: Image.Image, path) -> None:
    path = Path(path)
    try:
        im.save(path, format="PNG")
    except OSError as exc:
        raise OSError(f"cannot write image {path}: {exc}") from exc
