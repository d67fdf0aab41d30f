"""Classical dark channel prior: dark channel, airlight, transmission,
guided-filter refinement and scene radiance recovery.

The haze model is ``I = J t + A (1 - t)``; recovery inverts it as
``J = (I - A) / t + A`` with ``t`` floored at ``t0``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np

from hazeforge.imgcore import (
    as_field,
    as_image,
    box_mean,
    channel_min,
    luminance_mean,
    min_filter,
)

ATMOSPHERE_FLOOR = 1e-6


@dataclass(frozen=True)
class DcpConfig:
    patch: int = 15
    omega: float = 0.95
    t0: float = 0.1
    refine: bool = True
    guided_radius: int = 40
    guided_eps: float = 1e-3
    bright_fraction: float = 0.001
    # average the candidate set instead of taking the single brightest pixel
    average_atmosphere: bool = False

    def __post_init__(self):
        if int(self.patch) != self.patch or self.patch < 1 or self.patch % 2 == 0:
            raise ValueError(f"patch must be an odd integer >= 1, got {self.patch}")
        if not 0.0 <= self.omega <= 1.0:
            raise ValueError(f"omega must lie in [0, 1], got {self.omega}")
        if not 0.0 < self.t0 < 1.0:
            raise ValueError(f"t0 must lie in (0, 1), got {self.t0}")
        if self.guided_radius < 1:
            raise ValueError(f"guided_radius must be >= 1, got {self.guided_radius}")
        if not self.guided_eps > 0.0:
            raise ValueError(f"guided_eps must be > 0, got {self.guided_eps}")
        if not 0.0 < self.bright_fraction < 1.0:
            raise ValueError(
                f"bright_fraction must lie in (0, 1), got {self.bright_fraction}"
            )

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "DcpConfig":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        return cls(**known)


class DcpResult(NamedTuple):
    image: np.ndarray
    transmission: np.ndarray
    atmosphere: np.ndarray
    dark: np.ndarray


def dark_channel(img, patch: int = 15) -> np.ndarray:
    return min_filter(channel_min(img), patch)


def check_atmosphere(atm) -> np.ndarray:
    a = np.asarray(atm, dtype=np.float64).reshape(-1)
    if a.shape != (3,):
        raise ValueError(f"atmosphere must be a 3-vector, got shape {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a <= 0.0):
        raise ValueError(f"atmosphere components must be positive, got {a}")
    return a


def estimate_atmosphere(
    img, dark, bright_fraction: float = 0.001, average: bool = False
) -> np.ndarray:
    """Airlight from the most haze-opaque pixels.

    The ``max(1, floor(fraction * H * W))`` pixels with the largest dark
    channel value are candidates (ties broken by row-major index); the
    candidate with the highest mean RGB intensity is returned, or the mean of
    all candidates when ``average`` is set.
    """
    img = as_image(img)
    dark = as_field(dark)
    if dark.shape != img.shape[:2]:
        raise ValueError(
            f"dark channel shape {dark.shape} does not match image {img.shape[:2]}"
        )
    if not 0.0 < bright_fraction < 1.0:
        raise ValueError(f"bright_fraction must lie in (0, 1), got {bright_fraction}")
    n = dark.size
    k = max(1, int(np.floor(bright_fraction * n)))
    # stable sort on the negated values: descending value, ascending index
    order = np.argsort(-dark.reshape(-1), kind="stable")[:k]
    candidates = img.reshape(-1, 3)[order].astype(np.float64)
    if average:
        atm = candidates.mean(axis=0)
    else:
        atm = candidates[np.argmax(candidates.mean(axis=1))]
    return np.maximum(atm, ATMOSPHERE_FLOOR)


def raw_transmission(img, atm, patch: int = 15, omega: float = 0.95) -> np.ndarray:
    """Unrefined, unclamped ``1 - omega * dark(I / A)``."""
    img = np.asarray(as_image(img), dtype=np.float64)
    atm = check_atmosphere(atm)
    ratio = np.clip(img / atm, 0.0, 1.0)
    return 1.0 - omega * min_filter(ratio.min(axis=2), patch)


def estimate_transmission(img, atm, cfg: DcpConfig = DcpConfig()) -> np.ndarray:
    t = raw_transmission(img, atm, cfg.patch, cfg.omega)
    if cfg.refine:
        t = guided_filter(img, t, cfg.guided_radius, cfg.guided_eps)
    return np.clip(t, cfg.t0, 1.0)


def guided_filter(guide, src, radius: int = 40, eps: float = 1e-3) -> np.ndarray:
    """Edge-preserving smoothing of ``src`` steered by the gray level of ``guide``.

    Per window: ``a = cov(I, p) / (var(I) + eps)``, ``b = mean(p) - a mean(I)``;
    the output is ``mean(a) * I + mean(b)``.
    """
    src = np.asarray(as_field(src), dtype=np.float64)
    gray = np.asarray(luminance_mean(guide), dtype=np.float64)
    if gray.shape != src.shape:
        raise ValueError(f"guide {gray.shape} and source {src.shape} differ in size")
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    if eps < 0:
        raise ValueError(f"eps must be non-negative, got {eps}")
    if np.all(src == src.flat[0]):
        return src.copy()

    mean_i = box_mean(gray, radius)
    mean_p = box_mean(src, radius)
    cov_ip = box_mean(gray * src, radius) - mean_i * mean_p
    var_i = box_mean(gray * gray, radius) - mean_i * mean_i
    denom = var_i + eps
    a = np.divide(cov_ip, denom, out=np.zeros_like(cov_ip), where=denom > 0)
    b = mean_p - a * mean_i
    return box_mean(a, radius) * gray + box_mean(b, radius)


def recover_dcp(img, t, atm, clamp: bool = True) -> np.ndarray:
    img = np.asarray(as_image(img), dtype=np.float64)
    t = np.asarray(as_field(t), dtype=np.float64)
    atm = check_atmosphere(atm)
    if t.shape != img.shape[:2]:
        raise ValueError(f"transmission {t.shape} does not match image {img.shape[:2]}")
    out = (img - atm) / t[..., None] + atm
    return np.clip(out, 0.0, 1.0) if clamp else out


def estimate_intermediates(img, cfg: DcpConfig = DcpConfig()):
    """Dark channel, airlight and transmission of a hazy image."""
    dark = dark_channel(img, cfg.patch)
    atm = estimate_atmosphere(img, dark, cfg.bright_fraction, cfg.average_atmosphere)
    t = estimate_transmission(img, atm, cfg)
    return dark, atm, t


def dehaze_dcp(img, cfg: DcpConfig = DcpConfig()) -> DcpResult:
    img = as_image(img)
    dark, atm, t = estimate_intermediates(img, cfg)
    return DcpResult(recover_dcp(img, t, atm), t, atm, dark)
