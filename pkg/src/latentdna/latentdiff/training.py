"""Noise-prediction objective and the diffusion training loop."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import nnkernel as nk
from ..nnkernel import Tensor
from .sampling import LatentStats
from .schedule import NoiseSchedule, forward_diffuse
from .unet import UNet, UnetConfig

log = logging.getLogger(__name__)


class DiffusionDivergedError(FloatingPointError):
    pass


def noise_prediction_loss(z0, eps_model, schedule: NoiseSchedule, seed):
    """Squared error between drawn noise and its prediction.

    One step ``t ~ U{1..T}`` and one ``eps ~ N(0, I)`` per sample; the squared
    error is summed over latent elements and averaged over the batch. Returns
    a Tensor when the predictor does, else a float.
    """
    z0 = z0.data if isinstance(z0, Tensor) else np.asarray(z0)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n = len(z0)
    if n == 0:
        raise ValueError("empty batch")
    t = rng.integers(1, schedule.T + 1, size=n)
    eps = rng.standard_normal(z0.shape).astype(z0.dtype)
    zt = forward_diffuse(z0, t, eps, schedule).astype(z0.dtype)
    pred = eps_model(Tensor(zt) if isinstance(eps_model, nk.Module) else zt, t)
    if isinstance(pred, Tensor):
        diff = pred - Tensor(eps)
        return (diff * diff).sum() * (1.0 / n)
    diff = np.asarray(pred, dtype=np.float64) - eps
    return float(np.sum(diff * diff) / n)


@dataclass
class DiffusionTrainResult:
    model: UNet
    stats: LatentStats
    history: list[dict] = field(default_factory=list)


def train_diffusion(latents: np.ndarray, cfg: UnetConfig, schedule: NoiseSchedule, epochs: int,
                    lr: float = 5e-5, batch_size: int = 256, warmup: float | None = None,
                    seed: int = 0, stats: LatentStats | None = None, model: UNet | None = None,
                    on_epoch_end: Callable[[int, UNet, dict], None] | None = None,
                    time_budget: float | None = None) -> DiffusionTrainResult:
    """Adam with linear warmup then cosine decay on the noise-prediction loss.

    Latents are standardised per channel first (fitted here unless ``stats``
    is given). ``warmup`` is in epochs and defaults to 5% of ``epochs``.
    """
    latents = np.asarray(latents, dtype=np.float32)
    if len(latents) == 0:
        raise ValueError("no latents to train on")
    if latents.shape[1:] != cfg.validate().sample_shape:
        raise nk.DimensionError(f"latents {latents.shape[1:]} do not match UNet shape {cfg.sample_shape}")
    stats = LatentStats.fit(latents) if stats is None else stats
    data = stats.standardize(latents)
    model = UNet(cfg, seed) if model is None else model
    model.train()
    warmup = 0.05 * epochs if warmup is None else warmup
    opt = nk.Adam(model.parameters(), lr=lr)
    rng = np.random.default_rng(seed + 1)
    result = DiffusionTrainResult(model, stats)
    steps_per_epoch = math.ceil(len(data) / batch_size)
    started = time.perf_counter()
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(len(data))
        total = 0.0
        for b, i in enumerate(range(0, len(data), batch_size)):
            idx = perm[i : i + batch_size]
            loss = noise_prediction_loss(data[idx], model, schedule, rng)
            value = loss.item()
            if not math.isfinite(value):
                raise DiffusionDivergedError(f"non-finite diffusion loss at epoch {epoch}, batch {b + 1}")
            opt.zero_grad()
            loss.backward()
            progress = epoch - 1 + (b + 1) / steps_per_epoch
            opt.step(lr=nk.cosine_warmup_lr(lr, progress, epochs, warmup))
            total += value * len(idx)
        row = {"epoch": epoch, "loss": total / len(data),
               "lr": nk.cosine_warmup_lr(lr, epoch, epochs, warmup)}
        result.history.append(row)
        log.info("diffusion epoch %d loss %.4f", epoch, row["loss"])
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, row)
        if time_budget is not None and time.perf_counter() - started > time_budget:
            log.warning("diffusion time budget reached after epoch %d", epoch)
            break
    model.eval()
    return result
