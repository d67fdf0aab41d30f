"""Paired clean/hazy dataset manifests, grouped splits and desk fixtures.

A manifest is a CSV with header ``clean_path,hazy_path,haze_level``. One
clean image may appear in many rows, one per hazy variant, the way OTS
pairs each haze-free image with several haze intensities.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from hazeforge import imgcore

HEADER = ("clean_path", "hazy_path", "haze_level")
FIXTURE_SIZE = 64
FIXTURE_DENSITIES = (0.1, 0.2, 0.3)
FIXTURE_ATMOSPHERE = (0.9, 0.9, 0.9)


@dataclass(frozen=True)
class ManifestRow:
    clean_path: Path
    hazy_path: Path | None = None
    haze_level: float | None = None


@dataclass(frozen=True)
class DatasetManifest:
    rows: tuple[ManifestRow, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        seen = set()
        for row in self.rows:
            if not str(row.clean_path):
                raise ValueError("manifest row has an empty clean_path")
            key = (str(row.clean_path), str(row.hazy_path))
            if key in seen:
                raise ValueError(f"duplicate pair in manifest: {key}")
            seen.add(key)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def groups(self) -> dict[str, list[ManifestRow]]:
        """Rows keyed by clean image, in first-appearance order."""
        out: dict[str, list[ManifestRow]] = {}
        for row in self.rows:
            out.setdefault(str(row.clean_path), []).append(row)
        return out


class ManifestError(ValueError):
    pass


def load_manifest(path) -> DatasetManifest:
    """Parse a manifest CSV, resolving relative paths against its directory."""
    path = Path(path)
    base = path.resolve().parent
    rows = []
    seen: dict[tuple[str, str], int] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty file, expected header {','.join(HEADER)}")
        if tuple(h.strip() for h in header) != HEADER:
            raise ManifestError(
                f"{path}:1: bad header {header!r}, expected {','.join(HEADER)}"
            )
        for fields in reader:
            line = reader.line_num
            if not fields or all(not f.strip() for f in fields):
                continue
            if len(fields) != 3:
                raise ManifestError(f"{path}:{line}: expected 3 fields, got {len(fields)}")
            clean, hazy, level = (f.strip() for f in fields)
            if not clean:
                raise ManifestError(f"{path}:{line}: missing clean_path")
            try:
                haze_level = float(level) if level else None
            except ValueError:
                raise ManifestError(f"{path}:{line}: haze_level {level!r} is not numeric")
            row = ManifestRow(
                base / clean, base / hazy if hazy else None, haze_level
            )
            key = (str(row.clean_path), str(row.hazy_path))
            if key in seen:
                raise ManifestError(
                    f"{path}:{line}: duplicate pair ({clean}, {hazy}), first seen on line {seen[key]}"
                )
            seen[key] = line
            rows.append(row)
    return DatasetManifest(rows)


def _rel(p: Path | None, base: Path) -> str:
    if p is None:
        return ""
    try:
        return Path(os.path.relpath(Path(p).resolve(), base)).as_posix()
    except ValueError:
        return str(Path(p).resolve())


def _fmt_level(level: float | None) -> str:
    return "" if level is None else repr(float(level))


def save_manifest(manifest: DatasetManifest, path) -> None:
    """Write paths relative to the manifest's directory."""
    path = Path(path)
    base = path.resolve().parent
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(HEADER)
        for row in manifest:
            w.writerow(
                [_rel(row.clean_path, base), _rel(row.hazy_path, base), _fmt_level(row.haze_level)]
            )


def split(manifest: DatasetManifest, eval_fraction: float, seed: int = 0):
    """Partition by clean image so no clean image is on both sides."""
    if not 0.0 < eval_fraction < 1.0:
        raise ValueError(f"eval_fraction must lie in (0, 1), got {eval_fraction}")
    groups = list(manifest.groups().values())
    if not groups:
        raise ValueError("cannot split an empty manifest")
    # round half up; Python's round() would send 2.5 to 2
    n_eval = max(1, int(math.floor(eval_fraction * len(groups) + 0.5)))
    order = np.random.default_rng(seed).permutation(len(groups))
    eval_ids = set(order[:n_eval].tolist())
    train_rows = [r for i, g in enumerate(groups) if i not in eval_ids for r in g]
    eval_rows = [r for i, g in enumerate(groups) if i in eval_ids for r in g]
    return DatasetManifest(train_rows), DatasetManifest(eval_rows)


# -- fixtures ---------------------------------------------------------------


def render_clean(rng: np.random.Generator, size: int = FIXTURE_SIZE) -> np.ndarray:
    """Procedural outdoor-ish scene: a sky band over colored ground, with
    saturated rectangles and dark shadows so dark-channel windows find a
    near-zero channel almost everywhere below the sky."""
    h = w = size
    img = np.empty((h, w, 3), dtype=np.float64)
    rows = np.linspace(0.0, 1.0, h)[:, None]

    sky_rows = int(rng.integers(size // 10, size // 6 + 1))
    sky_top = rng.uniform([0.45, 0.6, 0.8], [0.6, 0.75, 0.95])
    sky_bottom = rng.uniform([0.7, 0.75, 0.85], [0.85, 0.85, 0.95])
    frac = rows[:sky_rows] / max(rows[sky_rows - 1, 0], 1e-9)
    img[:sky_rows] = sky_top + (sky_bottom - sky_top) * frac[..., None]

    ground = np.zeros(3)
    ground[rng.integers(3)] = rng.uniform(0.3, 0.7)
    ground[rng.integers(3)] += rng.uniform(0.1, 0.3)
    lower = img[sky_rows:]
    lower[:] = ground
    # vertical shading across the ground plane
    shade = np.linspace(1.0, 0.6, h - sky_rows)[:, None, None]
    lower *= shade

    for _ in range(int(rng.integers(4, 8))):
        y0 = int(rng.integers(sky_rows, h - 6))
        x0 = int(rng.integers(0, w - 6))
        y1 = min(h, y0 + int(rng.integers(6, 24)))
        x1 = min(w, x0 + int(rng.integers(6, 24)))
        color = rng.uniform(0.05, 0.9, 3)
        color[rng.integers(3)] = rng.uniform(0.0, 0.06)
        img[y0:y1, x0:x1] = color
        # shadow strip under each object
        sy1 = min(h, y1 + int(rng.integers(2, 5)))
        img[y1:sy1, x0:x1] *= 0.15

    texture = rng.normal(0.0, 0.02, (h, w, 1))
    return np.clip(img + texture, 0.0, 1.0)


def make_fixtures(out_dir, count: int, seed: int = 0) -> DatasetManifest:
    """Render ``count`` clean images and their hazy versions at densities
    0.1/0.2/0.3 (physical model, A = 0.9 gray), writing PNGs and
    ``manifest.csv`` under ``out_dir``."""
    from hazeforge.synth import HazeSpec, synthesize

    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    out_dir = Path(out_dir)
    (out_dir / "clean").mkdir(parents=True, exist_ok=True)
    (out_dir / "hazy").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(count):
        clean_path = out_dir / "clean" / f"img_{i:03d}.png"
        imgcore.save_image(render_clean(rng), clean_path)
        # synthesize from the quantized clean image that the manifest points to
        clean = imgcore.load_image(clean_path)
        for d in FIXTURE_DENSITIES:
            hazy = synthesize(clean, HazeSpec(d, atmosphere_override=FIXTURE_ATMOSPHERE))
            hazy_path = out_dir / "hazy" / f"img_{i:03d}_d{d:.1f}.png"
            imgcore.save_image(hazy, hazy_path)
            rows.append(ManifestRow(clean_path, hazy_path, d))
    manifest = DatasetManifest(rows)
    save_manifest(manifest, out_dir / "manifest.csv")
    return load_manifest(out_dir / "manifest.csv")
