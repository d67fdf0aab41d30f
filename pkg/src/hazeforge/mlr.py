"""Per-channel multiple linear regression on the terms of the haze model.

Dehazing direction::

    J = w0 * I/t + w1 * A/t + w2 * A + b

Synthesis direction::

    I = w0 * J t + w1 * A t + w2 * A + b

Both are fitted by plain gradient descent on ``(1/2n) sum (target - pred)^2``
with one full image per step by default.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from hazeforge.dcp import DcpConfig, DcpResult, check_atmosphere, estimate_intermediates
from hazeforge.imgcore import as_field, as_image, load_image

log = logging.getLogger(__name__)

DIRECTIONS = ("dehaze", "synth")


class FeaturePlanes(NamedTuple):
    x0: np.ndarray
    x1: np.ndarray
    x2: np.ndarray


@dataclass
class RegressionParams:
    """Three weight vectors and a bias, one entry per RGB channel."""

    w0: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    bias: np.ndarray
    direction: str = "dehaze"
    dcp: DcpConfig = field(default_factory=DcpConfig)

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValueError(f"direction must be one of {DIRECTIONS}, got {self.direction!r}")
        for name in ("w0", "w1", "w2", "bias"):
            v = np.asarray(getattr(self, name), dtype=np.float64).reshape(-1)
            if v.shape != (3,):
                raise ValueError(f"{name} must have 3 components, got {v.shape}")
            if not np.all(np.isfinite(v)):
                raise ValueError(f"{name} has non-finite components: {v}")
            setattr(self, name, v)

    @classmethod
    def identity(cls, direction: str = "dehaze", dcp: DcpConfig | None = None):
        """Parameters for which the model is exactly the physical haze model.

        For dehazing that is ``J = I/t - A/t + A``. For synthesis the
        physical model is ``I = J t - A t + A``, i.e. weights ``(1, -1, 1)``.
        """
        return cls.from_coefficients((1.0, -1.0, 1.0, 0.0), direction, dcp)

    @classmethod
    def from_coefficients(cls, coeffs, direction: str = "dehaze", dcp=None):
        """Same scalar ``(w0, w1, w2, bias)`` on every channel."""
        w0, w1, w2, b = (np.full(3, float(c)) for c in coeffs)
        return cls(w0, w1, w2, b, direction, dcp or DcpConfig())

    def as_vector(self) -> np.ndarray:
        """12-vector ordered ``w0[rgb], w1[rgb], w2[rgb], bias[rgb]``."""
        return np.concatenate([self.w0, self.w1, self.w2, self.bias])

    def with_vector(self, vec) -> "RegressionParams":
        v = np.asarray(vec, dtype=np.float64).reshape(4, 3)
        return RegressionParams(*v.copy(), direction=self.direction, dcp=self.dcp)

    def to_dict(self) -> dict:
        return {
            "direction": self.direction,
            "w0": self.w0.tolist(),
            "w1": self.w1.tolist(),
            "w2": self.w2.tolist(),
            "bias": self.bias.tolist(),
            "dcp": self.dcp.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegressionParams":
        try:
            return cls(
                np.array(data["w0"]),
                np.array(data["w1"]),
                np.array(data["w2"]),
                np.array(data["bias"]),
                direction=data["direction"],
                dcp=DcpConfig.from_dict(data.get("dcp", {})),
            )
        except KeyError as exc:
            raise ValueError(f"params document is missing field {exc}") from None

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "RegressionParams":
        return cls.from_dict(json.loads(Path(path).read_text()))


def _prepare(img, t, atm):
    img = np.asarray(as_image(img), dtype=np.float64)
    t = np.asarray(as_field(t), dtype=np.float64)
    if t.shape != img.shape[:2]:
        raise ValueError(f"transmission {t.shape} does not match image {img.shape[:2]}")
    return img, t[..., None], check_atmosphere(atm)


def features_dehaze(img, t, atm) -> FeaturePlanes:
    """Regressors ``I/t``, ``A/t`` and ``A`` for a hazy image."""
    img, t, atm = _prepare(img, t, atm)
    ones = np.ones_like(img)
    return FeaturePlanes(img / t, ones * atm / t, ones * atm)


def features_synth(img, t, atm) -> FeaturePlanes:
    """Regressors ``J t``, ``A t`` and ``A`` for a clean image.

    ``t`` is not floored here, so a zero transmission is accepted.
    """
    img, t, atm = _prepare(img, t, atm)
    ones = np.ones_like(img)
    return FeaturePlanes(img * t, ones * atm * t, ones * atm)


def forward(params: RegressionParams, f: FeaturePlanes) -> np.ndarray:
    """Unclamped model output; clamp only when emitting an image."""
    if not (f.x0.shape == f.x1.shape == f.x2.shape):
        raise ValueError("feature planes differ in shape")
    return params.w0 * f.x0 + params.w1 * f.x1 + params.w2 * f.x2 + params.bias


def _flat(arr) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64).reshape(-1, 3)


def mse_loss(pred, target, per_channel: bool = False):
    """``(1/2n) sum (target - pred)^2`` with ``n`` pixels per channel.

    Returns the per-channel losses, or their mean across channels.
    """
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"prediction {pred.shape} and target {target.shape} differ")
    r = _flat(target) - _flat(pred)
    losses = 0.5 * np.mean(r * r, axis=0)
    return losses if per_channel else float(losses.mean())


def loss_gradient(params: RegressionParams, f: FeaturePlanes, target) -> np.ndarray:
    """Gradient of each channel's loss w.r.t. that channel's parameters.

    Shape ``(4, 3)`` in ``as_vector`` order. Equivalently the gradient of the
    per-channel losses summed over channels.
    """
    r = _flat(target) - _flat(forward(params, f))
    xs = [_flat(x) for x in f]
    grads = [-np.mean(r * x, axis=0) for x in xs]
    grads.append(-np.mean(r, axis=0))
    return np.stack(grads)


def sgd_step(params: RegressionParams, f: FeaturePlanes, target, lr: float) -> RegressionParams:
    """One descent step: ``w_k += lr * mean(r * x_k)``, ``b += lr * mean(r)``."""
    if not lr > 0:
        raise ValueError(f"learning rate must be positive, got {lr}")
    grad = loss_gradient(params, f, target)
    return params.with_vector(params.as_vector() - lr * grad.reshape(-1))


# -- training ---------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    epochs: int = 50
    batch: int | None = None  # pixels per step; None = whole image
    seed: int = 0
    use_refined_t: bool = True
    shuffle: bool = True

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch is not None and self.batch < 1:
            raise ValueError(f"batch must be >= 1, got {self.batch}")


@dataclass
class TrainingReport:
    epochs: list = field(default_factory=list)  # [{"epoch": k, "mean_loss": v}]
    failures: list = field(default_factory=list)  # [(path, message)]

    @property
    def losses(self) -> list[float]:
        return [e["mean_loss"] for e in self.epochs]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e) + "\n" for e in self.epochs)

    def save(self, path) -> None:
        Path(path).write_text(self.to_jsonl())


def _pair_problem(row, direction: str, dcp_cfg: DcpConfig):
    clean = load_image(row.clean_path)
    hazy = load_image(row.hazy_path)
    if clean.shape != hazy.shape:
        raise ValueError(
            f"clean {clean.shape} and hazy {hazy.shape} images differ in size"
        )
    # t and A always come from the hazy image, in both directions
    _, atm, t = estimate_intermediates(hazy, dcp_cfg)
    if direction == "dehaze":
        return features_dehaze(hazy, t, atm), np.asarray(clean, dtype=np.float64)
    return features_synth(clean, t, atm), np.asarray(hazy, dtype=np.float64)


def prepare_problems(pairs, direction: str, dcp_cfg: DcpConfig, jobs: int = 1):
    """Load pairs and build ``(features, target)``; failures are collected."""

    def work(row):
        try:
            return _pair_problem(row, direction, dcp_cfg), None
        except (OSError, ValueError) as exc:
            return None, (str(row.hazy_path or row.clean_path), str(exc))

    rows = list(pairs)
    if jobs > 1:
        with ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(work, rows))
    else:
        results = [work(r) for r in rows]
    problems = [p for p, _ in results if p is not None]
    failures = [e for _, e in results if e is not None]
    for path, msg in failures:
        log.warning("skipping %s: %s", path, msg)
    return problems, failures


def _batches(f: FeaturePlanes, target, batch):
    xs = [_flat(x) for x in f]
    tgt = _flat(target)
    n = tgt.shape[0]
    size = n if batch is None else batch
    for lo in range(0, n, size):
        sl = slice(lo, min(lo + size, n))
        yield FeaturePlanes(*(x[sl] for x in xs)), tgt[sl]


def fit(params: RegressionParams, problems, cfg: TrainConfig, on_epoch=None):
    """Run SGD over prepared problems; returns params and per-epoch mean losses."""
    rng = np.random.default_rng(cfg.seed)
    losses = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(problems)) if cfg.shuffle else range(len(problems))
        step_losses = []
        for i in order:
            f, target = problems[i]
            for fb, tb in _batches(f, target, cfg.batch):
                # loss is recorded at the parameters the step starts from
                step_losses.append(mse_loss(forward(params, fb), tb))
                params = sgd_step(params, fb, tb, cfg.learning_rate)
        mean_loss = float(np.mean(step_losses))
        losses.append(mean_loss)
        if on_epoch is not None:
            on_epoch(epoch, mean_loss)
    return params, losses


def train(
    pairs,
    direction: str = "dehaze",
    dcp_cfg: DcpConfig = DcpConfig(),
    cfg: TrainConfig = TrainConfig(),
    jobs: int = 1,
) -> tuple[RegressionParams, TrainingReport]:
    """Fit the dehazing or synthesis model on (clean, hazy) pairs.

    Starts from the identity parameters so the untrained model equals the
    physical haze model. The DCP config used to estimate ``t`` is embedded in
    the returned params, with ``refine`` set from ``cfg.use_refined_t``.
    """
    if direction not in DIRECTIONS:
        raise ValueError(f"direction must be one of {DIRECTIONS}, got {direction!r}")
    pairs = list(pairs)
    if not pairs:
        raise ValueError("training manifest is empty")
    for row in pairs:
        if row.hazy_path is None:
            raise ValueError(f"row for {row.clean_path} has no hazy image")
    effective = DcpConfig.from_dict({**dcp_cfg.to_dict(), "refine": cfg.use_refined_t})
    problems, failures = prepare_problems(pairs, direction, effective, jobs)
    if not problems:
        raise RuntimeError(f"all {len(pairs)} training pairs failed to load")

    report = TrainingReport(failures=failures)

    def on_epoch(epoch, loss):
        report.epochs.append({"epoch": epoch, "mean_loss": loss})
        log.info("epoch %d mean loss %.6g", epoch, loss)

    params = RegressionParams.identity(direction, effective)
    params, _ = fit(params, problems, cfg, on_epoch)
    return params, report


def dehaze_mldcp(img, params: RegressionParams) -> DcpResult:
    """Dehaze with trained weights, using the DCP config stored in ``params``.

    """
    if params.direction != "dehaze":
        raise ValueError(f"expected dehaze-direction params, got {params.direction!r}")
    img = as_image(img)
    dark, atm, t = estimate_intermediates(img, params.dcp)
    out = np.clip(forward(params, features_dehaze(img, t, atm)), 0.0, 1.0)
    return DcpResult(out, t, atm, dark)
