"""Convolutional VAE mapping one-hot DNA to a C x H x W Gaussian latent.

Encoder: a stem convolution, then one multi-kernel residual block plus a
2x max-pool per entry of ``ladder``. The resulting (channels x length)
feature map is treated as a single-channel image, which strided 3x3
conv/BatchNorm/LeakyReLU blocks (one per ``conv2d_channels`` entry)
shrink to H x W; a 1x1 head emits
``2 * latent_channels`` maps split into mean and log-variance. The decoder
runs the same stages in reverse with transposed convolutions and
nearest-neighbour upsampling, and ends in a softmax over the four bases.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import nnkernel as nk
from .nnkernel import Tensor
from .nnkernel import functional as F
from .seqcodec import one_hot_batch

log = logging.getLogger(__name__)

LOGVAR_MIN, LOGVAR_MAX = -30.0, 20.0


class TrainingDivergedError(FloatingPointError):
    pass


@dataclass
class VaeConfig:
    sequence_length: int = 2048
    alphabet_size: int = 4
    ladder: tuple[int, ...] = (64, 64, 128, 128)
    kernel_sizes: tuple[int, ...] = (1, 3, 5)
    conv2d_channels: tuple[int, ...] = (32, 32, 32)
    latent_channels: int = 16
    latent_height: int = 16
    latent_width: int = 16
    kl_weight: float = 1e-4
    learning_rate: float = 1e-4
    lr_schedule: str = "constant"
    batch_size: int = 128
    recon_reduction: str = "sum"
    slope: float = 0.01

    @classmethod
    def paper(cls) -> "VaeConfig":
        return cls()

    @classmethod
    def desk(cls) -> "VaeConfig":
        return cls(
            sequence_length=256,
            ladder=(32, 64),
            conv2d_channels=(16, 32, 64),
            latent_channels=8,
            latent_height=8,
            latent_width=8,
            learning_rate=4e-3,
            lr_schedule="cosine",
            batch_size=32,
        )

    @property
    def latent_shape(self) -> tuple[int, int, int]:
        return (self.latent_channels, self.latent_height, self.latent_width)

    @property
    def conv2d_blocks(self) -> int:
        return len(self.conv2d_channels)

    @property
    def surface_shape(self) -> tuple[int, int]:
        """(channels, length) of the 1-D stage output."""
        return (self.ladder[-1], self.sequence_length >> len(self.ladder))

    def validate(self) -> "VaeConfig":
        self.ladder = tuple(int(c) for c in self.ladder)
        self.kernel_sizes = tuple(int(k) for k in self.kernel_sizes)
        if isinstance(self.conv2d_channels, int):
            self.conv2d_channels = (self.conv2d_channels,) * 3
        self.conv2d_channels = tuple(int(c) for c in self.conv2d_channels)
        if not self.conv2d_channels or min(self.conv2d_channels) < 1:
            raise ValueError("conv2d_channels needs at least one positive width")
        if not self.ladder:
            raise ValueError("ladder must have at least one stage")
        if self.alphabet_size != 4:
            raise ValueError("alphabet_size is fixed at 4")
        if any(k < 1 or k % 2 == 0 for k in self.kernel_sizes):
            raise ValueError("multi-kernel sizes must be odd and positive")
        if self.sequence_length % (1 << len(self.ladder)):
            raise ValueError(
                f"sequence_length {self.sequence_length} not divisible by 2^{len(self.ladder)} pooling stages"
            )
        h, w = self.surface_shape
        f = 1 << self.conv2d_blocks
        if h != self.latent_height * f or w != self.latent_width * f:
            raise ValueError(
                f"1-D stage surface {h}x{w} must equal latent {self.latent_height}x{self.latent_width} "
                f"times 2^{self.conv2d_blocks}"
            )
        if self.kl_weight <= 0:
            raise ValueError("kl_weight must be positive")
        if self.lr_schedule not in ("constant", "cosine"):
            raise ValueError("lr_schedule must be 'constant' or 'cosine'")
        if self.recon_reduction not in ("sum", "mean"):
            raise ValueError("recon_reduction must be 'sum' or 'mean'")
        return self

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PosteriorGaussian:
    mean: Tensor
    logvar: Tensor


class MultiKernelBlock(nk.Module):
    """Norm, activation, parallel convolutions of several widths, 1x1 merge, residual."""

    def __init__(self, cin: int, cout: int, kernels: Sequence[int], rng, slope: float):
        self.slope = slope
        self.norm = nk.BatchNorm(cin)
        self.branches = [nk.Conv1d(cin, cout, k, rng, padding=k // 2) for k in kernels]
        self.merge = nk.Conv1d(cout * len(kernels), cout, 1, rng)
        self.skip = nk.Conv1d(cin, cout, 1, rng, bias=False) if cin != cout else None

    def forward(self, x: Tensor) -> Tensor:
        h = F.leaky_relu(self.norm(x), self.slope)
        h = self.merge(nk.concat([b(h) for b in self.branches], axis=1))
        return h + (x if self.skip is None else self.skip(x))


class Encoder(nk.Module):
    def __init__(self, cfg: VaeConfig, rng):
        self.cfg = cfg
        self.stem = nk.Conv1d(cfg.alphabet_size, cfg.ladder[0], 3, rng, padding=1)
        chans = (cfg.ladder[0],) + cfg.ladder
        self.stages = [MultiKernelBlock(chans[i], chans[i + 1], cfg.kernel_sizes, rng, cfg.slope)
                       for i in range(len(cfg.ladder))]
        c2 = (1,) + cfg.conv2d_channels
        self.convs = [nk.Conv2d(c2[i], c2[i + 1], 3, rng, stride=2, padding=1)
                      for i in range(cfg.conv2d_blocks)]
        self.norms = [nk.BatchNorm(c) for c in cfg.conv2d_channels]
        self.head = nk.Conv2d(c2[-1], 2 * cfg.latent_channels, 1, rng)

    def forward(self, x: Tensor) -> PosteriorGaussian:
        cfg = self.cfg
        h = self.stem(x)
        for stage in self.stages:
            h = F.maxpool1d(stage(h), 2)
        n, c, length = h.shape
        h = h.reshape(n, 1, c, length)
        for conv, norm in zip(self.convs, self.norms):
            h = F.leaky_relu(norm(conv(h)), cfg.slope)
        h = self.head(h)
        k = cfg.latent_channels
        return PosteriorGaussian(h[:, :k], h[:, k:].clamp(LOGVAR_MIN, LOGVAR_MAX))


class Decoder(nk.Module):
    def __init__(self, cfg: VaeConfig, rng):
        self.cfg = cfg
        c2 = cfg.conv2d_channels[::-1] + cfg.conv2d_channels[:1]
        self.inp = nk.Conv2d(cfg.latent_channels, c2[0], 1, rng)
        self.deconvs = [nk.ConvTranspose2d(c2[i], c2[i + 1], 2, rng, stride=2)
                        for i in range(cfg.conv2d_blocks)]
        self.norms = [nk.BatchNorm(c) for c in c2[1:]]
        self.to_surface = nk.Conv2d(c2[-1], 1, 1, rng)
        chans = (cfg.ladder[0],) + cfg.ladder
        self.stages = [MultiKernelBlock(chans[i + 1], chans[i], cfg.kernel_sizes, rng, cfg.slope)
                       for i in reversed(range(len(cfg.ladder)))]
        self.out_norm = nk.BatchNorm(cfg.ladder[0])
        self.out = nk.Conv1d(cfg.ladder[0], cfg.alphabet_size, 3, rng, padding=1)
        # zero logits: the untrained decoder is the uniform predictor
        self.out.weight.data[:] = 0.0

    def forward(self, z: Tensor) -> Tensor:
        cfg = self.cfg
        h = self.inp(z)
        for deconv, norm in zip(self.deconvs, self.norms):
            h = F.leaky_relu(norm(deconv(h)), cfg.slope)
        h = self.to_surface(h)
        n = h.shape[0]
        h = h.reshape(n, h.shape[2], h.shape[3])
        for stage in self.stages:
            h = stage(F.upsample_nearest(h, 2))
        logits = self.out(F.leaky_relu(self.out_norm(h), cfg.slope))
        return F.softmax(logits, axis=1)


class VAE(nk.Module):
    def __init__(self, cfg: VaeConfig, seed: int = 0):
        self.cfg = cfg.validate()
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(cfg, rng)
        self.decoder = Decoder(cfg, rng)

    def encode(self, x) -> PosteriorGaussian:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float32))
        if x.ndim == 2:
            x = x.reshape(1, *x.shape)
        expected = (self.cfg.alphabet_size, self.cfg.sequence_length)
        if x.shape[1:] != expected:
            raise nk.DimensionError(f"encoder input must be (N, {expected[0]}, {expected[1]}), got {x.shape}")
        return self.encoder(x)

    def decode(self, z) -> Tensor:
        z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float32))
        if z.ndim == 3:
            z = z.reshape(1, *z.shape)
        if z.shape[1:] != self.cfg.latent_shape:
            raise nk.DimensionError(f"decoder input must be (N, {self.cfg.latent_shape}), got {z.shape}")
        return self.decoder(z)

    def forward(self, x, rng: np.random.Generator):
        post = self.encode(x)
        return post, self.decode(reparameterize(post, rng))

    def encode_means(self, seqs_or_onehot, batch_size: int = 256) -> np.ndarray:
        """Posterior means for many inputs, in eval mode without a graph."""
        x = seqs_or_onehot
        if not isinstance(x, np.ndarray):
            x = one_hot_batch(x)
        was_training = self.training
        self.eval()
        out = []
        with nk.no_grad():
            for i in range(0, len(x), batch_size):
                out.append(self.encode(x[i : i + batch_size]).mean.data)
        self.train(was_training)
        if not out:
            return np.zeros((0, *self.cfg.latent_shape), dtype=np.float32)
        return np.concatenate(out)

    def decode_probs(self, z: np.ndarray, batch_size: int = 256) -> np.ndarray:
        was_training = self.training
        self.eval()
        out = []
        with nk.no_grad():
            for i in range(0, len(z), batch_size):
                out.append(self.decode(z[i : i + batch_size]).data)
        self.train(was_training)
        if not out:
            return np.zeros((0, 4, self.cfg.sequence_length), dtype=np.float32)
        return np.concatenate(out)


def reparameterize(post: PosteriorGaussian, noise_seed) -> Tensor:
    """``mean + exp(logvar / 2) * eps`` with eps drawn from the seeded stream."""
    rng = noise_seed if isinstance(noise_seed, np.random.Generator) else np.random.default_rng(noise_seed)
    eps = rng.standard_normal(post.mean.shape).astype(post.mean.dtype)
    return post.mean + (post.logvar * 0.5).exp() * Tensor(eps)


def elbo_loss(x, post: PosteriorGaussian, decoded: Tensor, kl_weight: float = 1e-4,
              reduction: str = "sum") -> tuple[Tensor, Tensor, Tensor]:
    """Negative ELBO against a standard-normal prior, averaged over the batch.

    ``recon`` is the cross entropy summed (``reduction="sum"``) or averaged
    over positions; ``kl`` is summed over latent elements. Returns
    ``(recon + kl_weight * kl, recon, kl)``.
    """
    x = x.data if isinstance(x, Tensor) else np.asarray(x)
    if x.ndim == decoded.ndim - 1:
        x = x[None]
    n = decoded.shape[0]
    per_pos = F.cross_entropy(decoded, x, axis=1, reduction="none")
    recon = per_pos.sum() * (1.0 / n)
    if reduction == "mean":
        recon = recon * (1.0 / per_pos.shape[-1])
    lv = post.logvar
    kl = (lv.exp() + post.mean * post.mean - 1.0 - lv).sum() * (0.5 / n)
    return recon + kl * kl_weight, recon, kl


def per_base_accuracy(model: VAE, onehot: np.ndarray, batch_size: int = 256) -> float:
    """Fraction of positions whose argmax reconstruction (posterior mean) is right."""
    if len(onehot) == 0:
        return float("nan")
    probs = model.decode_probs(model.encode_means(onehot, batch_size), batch_size)
    return float(np.mean(probs.argmax(axis=1) == onehot.argmax(axis=1)))


@dataclass
class VaeTrainResult:
    model: VAE
    history: list[dict] = field(default_factory=list)
    best_epoch: int = -1
    best_total: float = math.inf
    best_state: dict | None = None


def _evaluate(model: VAE, x: np.ndarray, cfg: VaeConfig, batch_size: int) -> dict:
    model.eval()
    tot = rec = kl = 0.0
    with nk.no_grad():
        for i in range(0, len(x), batch_size):
            xb = x[i : i + batch_size]
            post = model.encode(xb)
            probs = model.decode(post.mean)
            t, r, k = elbo_loss(xb, post, probs, cfg.kl_weight, cfg.recon_reduction)
            tot += t.item() * len(xb)
            rec += r.item() * len(xb)
            kl += k.item() * len(xb)
    model.train()
    n = len(x)
    return {"total": tot / n, "recon": rec / n, "kl": kl / n}


def fit_vae(train_seqs, val_seqs, cfg: VaeConfig, epochs: int, seed: int = 0,
            model: VAE | None = None, on_epoch_end: Callable[[int, VAE, dict], None] | None = None,
            time_budget: float | None = None) -> VaeTrainResult:
    """Adam on the negative ELBO; keeps the state with the best validation total.

    With ``lr_schedule="cosine"`` the step size decays to zero over ``epochs``.

    Validation uses the posterior mean (no sampling), so it is deterministic.
    """
    cfg.validate()
    train_x = train_seqs if isinstance(train_seqs, np.ndarray) else one_hot_batch(train_seqs)
    val_x = val_seqs if isinstance(val_seqs, np.ndarray) else one_hot_batch(val_seqs)
    if len(train_x) == 0:
        raise ValueError("training split is empty")
    if len(train_x) < 2:
        raise ValueError("need at least 2 training sequences for batch statistics")
    model = VAE(cfg, seed) if model is None else model
    model.train()
    opt = nk.Adam(model.parameters(), lr=cfg.learning_rate)
    rng = np.random.default_rng(seed + 1)
    result = VaeTrainResult(model)
    started = time.perf_counter()
    bs = cfg.batch_size
    for epoch in range(1, epochs + 1):
        perm = rng.permutation(len(train_x))
        # drop a trailing singleton batch; batchnorm needs two samples
        n_used = len(perm) - (1 if len(perm) % bs == 1 else 0)
        sums = np.zeros(3)
        n_batches = -(-n_used // bs)
        for b, i in enumerate(range(0, n_used, bs)):
            if cfg.lr_schedule == "cosine":
                opt.lr = nk.cosine_warmup_lr(cfg.learning_rate, epoch - 1 + b / n_batches, epochs, 0.0)
            xb = train_x[perm[i : min(i + bs, n_used)]]
            post, probs = model(xb, rng)
            total, recon, kl = elbo_loss(xb, post, probs, cfg.kl_weight, cfg.recon_reduction)
            if not np.isfinite(total.data):
                raise TrainingDivergedError(
                    f"non-finite loss at epoch {epoch} batch {b}: recon={recon.item()} kl={kl.item()}"
                )
            total.backward()
            opt.step(zero_grad=True)
            sums += np.array([total.item(), recon.item(), kl.item()]) * len(xb)
        sums /= n_used
        row = {"epoch": epoch, "split": "train", "total": sums[0], "recon": sums[1], "kl": sums[2]}
        result.history.append(row)
        if len(val_x):
            vrow = {"epoch": epoch, "split": "validation", **_evaluate(model, val_x, cfg, max(bs, 2))}
            result.history.append(vrow)
        else:
            vrow = row
        if vrow["total"] < result.best_total:
            result.best_total = vrow["total"]
            result.best_epoch = epoch
            result.best_state = model.state_dict()
        log.info("epoch %d train total=%.4f recon=%.4f kl=%.3f | val total=%.4f", epoch, row["total"],
                 row["recon"], row["kl"], vrow["total"])
        if on_epoch_end is not None:
            on_epoch_end(epoch, model, vrow)
        if time_budget is not None and time.perf_counter() - started > time_budget:
            log.info("time budget reached after epoch %d", epoch)
            break
    if result.best_state is not None:
        model.load_state_dict(result.best_state)
    model.eval()
    return result


def train_vae(table, cfg: VaeConfig, epochs: int, seed: int = 0, **kwargs) -> VaeTrainResult:
    """Train on a :class:`~latentdna.datapipe.DatasetTable`'s train/validation splits."""
    train = table.sequences("train")
    if not train:
        raise ValueError("table has no training records")
    return fit_vae(train, table.sequences("validation"), cfg, epochs, seed, **kwargs)
