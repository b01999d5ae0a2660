"""Small UNet noise predictor over (C, H, W) latents.

Each stage stacks residual blocks (GroupNorm, swish, 3x3 conv, additive
time projection, GroupNorm, swish, 3x3 conv, then a skip sum), optionally
follows each block with self-attention, and changes resolution by a factor
of two between stages. Up stages concatenate the matching down-stage output
before their first block.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .. import nnkernel as nk
from ..nnkernel import Tensor
from ..nnkernel import functional as F


@dataclass
class UnetConfig:
    channels: int = 16
    height: int = 16
    width: int = 16
    ladder: tuple[int, ...] = (256, 256, 512, 512)
    resnets: int = 8
    attention_down: tuple[int, ...] = (2,)
    attention_up: tuple[int, ...] = (1,)
    heads: int = 8
    head_dim: int = 64
    time_dim: int | None = None
    groups: int = 32

    @classmethod
    def paper(cls) -> "UnetConfig":
        return cls()

    @classmethod
    def desk(cls) -> "UnetConfig":
        return cls(channels=8, height=8, width=8, ladder=(32, 64), resnets=2,
                   attention_down=(1,), attention_up=(0,), heads=4, head_dim=16, groups=8)

    @property
    def sample_shape(self) -> tuple[int, int, int]:
        return (self.channels, self.height, self.width)

    @property
    def time_embedding_dim(self) -> int:
        return 4 * self.ladder[0] if self.time_dim is None else self.time_dim

    def validate(self) -> "UnetConfig":
        self.ladder = tuple(int(c) for c in self.ladder)
        self.attention_down = tuple(int(i) for i in self.attention_down)
        self.attention_up = tuple(int(i) for i in self.attention_up)
        if not self.ladder or min(self.ladder) < 1:
            raise ValueError("ladder needs at least one positive width")
        if self.resnets < 1:
            raise ValueError("resnets must be >= 1")
        n = len(self.ladder)
        for name, idx in (("attention_down", self.attention_down), ("attention_up", self.attention_up)):
            if any(i < 0 or i >= n for i in idx):
                raise ValueError(f"{name} indices {idx} out of range for {n} stages")
        f = 1 << (n - 1)
        if self.height % f or self.width % f:
            raise ValueError(f"latent {self.height}x{self.width} not divisible by 2^{n - 1} downsamplings")
        for c in self.ladder:
            if c % self._groups_for(c):
                raise ValueError(f"width {c} not divisible into GroupNorm groups")
        return self

    def _groups_for(self, channels: int) -> int:
        return math.gcd(self.groups, channels)

    def to_dict(self) -> dict:
        return asdict(self)


def timestep_embedding(t, dim: int) -> np.ndarray:
    """Sinusoidal encoding ``[sin(t w_k), cos(t w_k)]`` with geometric frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half) / max(half, 1))
    args = t[:, None] * freqs[None]
    emb = np.concatenate([np.sin(args), np.cos(args)], axis=1)
    if dim % 2:
        emb = np.concatenate([emb, np.zeros((len(t), 1))], axis=1)
    return emb.astype(np.float32)


class ResBlock(nk.Module):
    def __init__(self, cin: int, cout: int, tdim: int, cfg: UnetConfig, rng):
        self.norm1 = nk.GroupNorm(cfg._groups_for(cin), cin)
        self.conv1 = nk.Conv2d(cin, cout, 3, rng, padding=1)
        self.time_proj = nk.Linear(tdim, cout, rng)
        self.norm2 = nk.GroupNorm(cfg._groups_for(cout), cout)
        self.conv2 = nk.Conv2d(cout, cout, 3, rng, padding=1)
        self.skip = nk.Conv2d(cin, cout, 1, rng) if cin != cout else None

    def forward(self, x: Tensor, temb: Tensor) -> Tensor:
        h = self.conv1(F.swish(self.norm1(x)))
        tp = self.time_proj(F.swish(temb))
        h = h + tp.reshape(tp.shape[0], tp.shape[1], 1, 1)
        h = self.conv2(F.swish(self.norm2(h)))
        return h + (x if self.skip is None else self.skip(x))


class AttentionBlock(nk.Module):
    def __init__(self, channels: int, cfg: UnetConfig, rng):
        self.norm = nk.GroupNorm(cfg._groups_for(channels), channels)
        self.attn = nk.MultiHeadAttention(channels, cfg.heads, cfg.head_dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        n, c, h, w = x.shape
        tokens = self.norm(x).reshape(n, c, h * w).transpose(0, 2, 1)
        out = self.attn(tokens).transpose(0, 2, 1).reshape(n, c, h, w)
        return x + out


class Stage(nk.Module):
    def __init__(self, cin: int, cout: int, tdim: int, cfg: UnetConfig, attend: bool, rng):
        self.blocks = [ResBlock(cin if i == 0 else cout, cout, tdim, cfg, rng) for i in range(cfg.resnets)]
        self.attns = [AttentionBlock(cout, cfg, rng) for _ in range(cfg.resnets)] if attend else []

    def forward(self, x: Tensor, temb: Tensor) -> Tensor:
        for i, block in enumerate(self.blocks):
            x = block(x, temb)
            if self.attns:
                x = self.attns[i](x)
        return x


class UNet(nk.Module):
    def __init__(self, cfg: UnetConfig, seed: int = 0):
        self.cfg = cfg.validate()
        rng = np.random.default_rng(seed)
        lad = cfg.ladder
        tdim = cfg.time_embedding_dim
        self.time_in = nk.Linear(lad[0], tdim, rng)
        self.time_out = nk.Linear(tdim, tdim, rng)
        self.inp = nk.Conv2d(cfg.channels, lad[0], 3, rng, padding=1)
        self.down = []
        self.downsamples = []
        prev = lad[0]
        for i, c in enumerate(lad):
            self.down.append(Stage(prev, c, tdim, cfg, i in cfg.attention_down, rng))
            if i < len(lad) - 1:
                self.downsamples.append(nk.Conv2d(c, c, 3, rng, stride=2, padding=1))
            prev = c
        self.mid = ResBlock(prev, prev, tdim, cfg, rng)
        self.up = []
        self.upsamples = []
        for j, i in enumerate(reversed(range(len(lad)))):
            c = lad[i]
            self.up.append(Stage(prev + c, c, tdim, cfg, j in cfg.attention_up, rng))
            if i > 0:
                self.upsamples.append(nk.Conv2d(c, c, 3, rng, padding=1))
            prev = c
        self.out_norm = nk.GroupNorm(cfg._groups_for(prev), prev)
        self.out = nk.Conv2d(prev, cfg.channels, 3, rng, padding=1)

    def forward(self, z, t) -> Tensor:
        cfg = self.cfg
        z = z if isinstance(z, Tensor) else Tensor(np.asarray(z, dtype=np.float32))
        if z.ndim == 3:
            z = z.reshape(1, *z.shape)
        if z.shape[1:] != cfg.sample_shape:
            raise nk.DimensionError(f"UNet input must be (N, {cfg.sample_shape}), got {z.shape}")
        t = np.broadcast_to(np.asarray(t), (z.shape[0],))
        temb = Tensor(timestep_embedding(t, cfg.ladder[0]).astype(z.dtype))
        temb = self.time_out(F.swish(self.time_in(temb)))

        h = self.inp(z)
        skips = []
        for i, stage in enumerate(self.down):
            h = stage(h, temb)
            skips.append(h)
            if i < len(self.downsamples):
                h = self.downsamples[i](h)
        h = self.mid(h, temb)
        for j, stage in enumerate(self.up):
            h = stage(nk.concat([h, skips.pop()], axis=1), temb)
            if j < len(self.upsamples):
                h = self.upsamples[j](F.upsample_nearest(h, 2))
        return self.out(F.swish(self.out_norm(h)))

    def predictor(self):
        """Graph-free numpy callable ``(z, t) -> eps`` in eval mode."""
        def predict(z: np.ndarray, t) -> np.ndarray:
            with nk.no_grad():
                return self.forward(Tensor(np.asarray(z, dtype=np.float32)), t).data
        predict.sample_shape = self.cfg.sample_shape
        return predict
