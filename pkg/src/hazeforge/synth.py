"""Uniform-density synthetic haze through the inverse regression model.

Haze density ``d`` maps to a constant transmission ``t = 1 - d``. With the
physical parameters ``(1, -1, 1, 0)`` the output is ``J (1 - d) + A d``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hazeforge import imgcore
from hazeforge.dataset import DatasetManifest, ManifestRow
from hazeforge.dcp import DcpConfig, check_atmosphere, dark_channel, estimate_atmosphere
from hazeforge.mlr import RegressionParams, features_synth, forward

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HazeSpec:
    density: float
    atmosphere_override: tuple[float, float, float] | None = None
    params: RegressionParams | None = None  # None = physical model

    def __post_init__(self):
        if not 0.0 <= self.density < 1.0:
            raise ValueError(f"density must lie in [0, 1), got {self.density}")
        if self.params is not None and self.params.direction != "synth":
            raise ValueError(
                f"haze synthesis needs synth-direction params, got {self.params.direction!r}"
            )
        if self.atmosphere_override is not None:
            check_atmosphere(self.atmosphere_override)

    @property
    def resolved_params(self) -> RegressionParams:
        return self.params or RegressionParams.identity("synth")


def synthesize(clean, spec: HazeSpec, dcp_cfg: DcpConfig = DcpConfig(), clamp: bool = True):
    clean = np.asarray(imgcore.as_image(clean), dtype=np.float64)
    if spec.atmosphere_override is not None:
        atm = check_atmosphere(spec.atmosphere_override)
    else:
        dark = dark_channel(clean, dcp_cfg.patch)
        atm = estimate_atmosphere(
            clean, dark, dcp_cfg.bright_fraction, dcp_cfg.average_atmosphere
        )
    t = np.full(clean.shape[:2], 1.0 - spec.density)
    out = forward(spec.resolved_params, features_synth(clean, t, atm))
    return np.clip(out, 0.0, 1.0) if clamp else out


def _common_root(paths) -> Path:
    parents = [str(Path(p).resolve().parent) for p in paths]
    return Path(os.path.commonpath(parents)) if parents else Path(".")


def synthesize_dataset(
    manifest: DatasetManifest,
    spec: HazeSpec,
    out_dir,
    dcp_cfg: DcpConfig = DcpConfig(),
    root=None,
    jobs: int = 1,
):
    """Write one hazy PNG per distinct clean image.

    Output paths mirror each clean image's path relative to ``root``
    (default: the deepest directory shared by all clean images). Returns the
    new manifest and a list of ``(path, message)`` failures.
    """
    out_dir = Path(out_dir)
    cleans = list(dict.fromkeys(Path(r.clean_path) for r in manifest))
    root = Path(root).resolve() if root is not None else _common_root(cleans)

    def work(clean_path: Path):
        rel = clean_path.resolve().relative_to(root)
        target = (out_dir / rel).with_suffix(".png")
        try:
            hazy = synthesize(imgcore.load_image(clean_path), spec, dcp_cfg)
            target.parent.mkdir(parents=True, exist_ok=True)
            imgcore.save_image(hazy, target)
        except (OSError, ValueError) as exc:
            return None, (str(clean_path), str(exc))
        return ManifestRow(clean_path, target, spec.density), None

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(work, cleans))
    else:
        results = [work(c) for c in cleans]
    failures = [e for _, e in results if e is not None]
    for path, msg in failures:
        log.warning("failed %s: %s", path, msg)
    rows = [r for r, _ in results if r is not None]
    return DatasetManifest(rows), failures
