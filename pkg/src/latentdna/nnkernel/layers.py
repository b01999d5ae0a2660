"""Parameter containers and the layer classes built from :mod:`functional`."""
from __future__ import annotations

import math
from typing import Iterator

import numpy as np

from . import functional as F
from .tensor import DimensionError, Tensor


class Parameter(Tensor):
    """A trainable tensor that also carries its Adam moment state."""

    def __init__(self, data, dtype=None):
        super().__init__(data, requires_grad=True, dtype=dtype)
        self.m = np.zeros_like(self.data)
        self.v = np.zeros_like(self.data)
        self.step = 0

    def assign(self, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=self.data.dtype)
        if value.shape != self.data.shape:
            raise DimensionError(f"cannot assign shape {value.shape} to parameter of shape {self.data.shape}")
        self.data = value.copy()

    def astype(self, dtype) -> None:
        self.data = self.data.astype(dtype)
        self.m = self.m.astype(dtype)
        self.v = self.v.astype(dtype)
        if self.grad is not None:
            self.grad = self.grad.astype(dtype)

    def __repr__(self) -> str:
        return f"Parameter(shape={self.shape}, dtype={self.dtype}, step={self.step})"


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int, slope: float = 0.01, dtype=np.float32):
    gain = math.sqrt(2.0 / (1.0 + slope * slope))
    bound = gain * math.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


class Module:
    """Base class: discovers parameters, buffers and submodules by attribute."""

    training = True

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def _children(self) -> Iterator[tuple[str, object]]:
        for name, val in vars(self).items():
            if isinstance(val, (Parameter, Module)):
                yield name, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, (Parameter, Module)):
                        yield f"{name}.{i}", item

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for name, val in self._children():
            if isinstance(val, Parameter):
                yield prefix + name, val
            else:
                yield from val.named_parameters(prefix + name + ".")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def modules(self) -> Iterator["Module"]:
        yield self
        for _, val in self._children():
            if isinstance(val, Module):
                yield from val.modules()

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for name, arr in getattr(self, "_buffers", {}).items():
            yield prefix + name, arr
        for name, val in self._children():
            if isinstance(val, Module):
                yield from val.named_buffers(prefix + name + ".")

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        if "_buffers" not in vars(self):
            self._buffers = {}
        self._buffers[name] = value

    def train(self, mode: bool = True) -> "Module":
        for m in self.modules():
            m.training = mode
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def astype(self, dtype) -> "Module":
        for p in self.parameters():
            p.astype(dtype)
        for m in self.modules():
            for k, v in getattr(m, "_buffers", {}).items():
                m._buffers[k] = v.astype(dtype)
        return self

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        state = {name: p.data.copy() for name, p in self.named_parameters()}
        for name, arr in self.named_buffers():
            state[name] = arr.copy()
        return state

    def load_state_dict(self, state: dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        buffers = {}
        for m_prefix, m in self._named_modules():
            for k in getattr(m, "_buffers", {}):
                buffers[m_prefix + k] = (m, k)
        expected = set(params) | set(buffers)
        if strict:
            missing = expected - set(state)
            unexpected = set(state) - expected
            if missing or unexpected:
                raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, value in state.items():
            if name in params:
                params[name].assign(value)
            elif name in buffers:
                m, k = buffers[name]
                if m._buffers[k].shape != np.shape(value):
                    raise DimensionError(f"buffer {name}: shape {np.shape(value)} != {m._buffers[k].shape}")
                m._buffers[k] = np.asarray(value, dtype=m._buffers[k].dtype).copy()

    def _named_modules(self, prefix: str = "") -> Iterator[tuple[str, "Module"]]:
        yield prefix, self
        for name, val in self._children():
            if isinstance(val, Module):
                yield from val._named_modules(prefix + name + ".")


class Linear(Module):
    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True,
                 dtype=np.float32):
        self.weight = Parameter(kaiming_uniform(rng, (out_features, in_features), in_features, dtype=dtype))
        self.bias = Parameter(np.zeros(out_features, dtype=dtype)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class Conv1d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator, stride: int = 1,
                 padding: int = 0, bias: bool = True, dtype=np.float32):
        fan_in = in_ch * kernel
        self.weight = Parameter(kaiming_uniform(rng, (out_ch, in_ch, kernel), fan_in, dtype=dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv1d(x, self.weight, self.bias, self.stride, self.padding)


class Conv2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator, stride: int = 1,
                 padding: int = 0, bias: bool = True, dtype=np.float32):
        fan_in = in_ch * kernel * kernel
        self.weight = Parameter(kaiming_uniform(rng, (out_ch, in_ch, kernel, kernel), fan_in, dtype=dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None
        self.stride = stride
        self.padding = padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator, stride: int = 1,
                 bias: bool = True, dtype=np.float32):
        # each output pixel receives in_ch * (kernel / stride)^2 contributions
        fan_in = max(1, in_ch * (kernel // stride) ** 2)
        self.weight = Parameter(kaiming_uniform(rng, (in_ch, out_ch, kernel, kernel), fan_in, dtype=dtype))
        self.bias = Parameter(np.zeros(out_ch, dtype=dtype)) if bias else None
        self.stride = stride

    def forward(self, x: Tensor) -> Tensor:
        return F.transposed_conv2d(x, self.weight, self.bias, self.stride)


class BatchNorm(Module):
    """Batch normalisation for (N, C, ...) input of any spatial rank."""

    def __init__(self, channels: int, dtype=np.float32):
        self.scale = Parameter(np.ones(channels, dtype=dtype))
        self.shift = Parameter(np.zeros(channels, dtype=dtype))
        self.register_buffer("running_mean", np.zeros(channels, dtype=dtype))
        self.register_buffer("running_var", np.ones(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.batchnorm(
            x, self.scale, self.shift, self.training,
            self._buffers["running_mean"], self._buffers["running_var"],
        )


class GroupNorm(Module):
    def __init__(self, groups: int, channels: int, dtype=np.float32):
        if channels % groups:
            raise DimensionError(f"{channels} channels not divisible by {groups} groups")
        self.groups = groups
        self.scale = Parameter(np.ones(channels, dtype=dtype))
        self.shift = Parameter(np.zeros(channels, dtype=dtype))

    def forward(self, x: Tensor) -> Tensor:
        return F.group_norm(x, self.groups, self.scale, self.shift)


class MultiHeadAttention(Module):
    """Bias-free multi-head attention over token sequences (B, N, d).

    With no ``context`` the layer attends to its own input.
    """

    def __init__(self, dim: int, heads: int, head_dim: int, rng: np.random.Generator,
                 context_dim: int | None = None, dtype=np.float32):
        inner = heads * head_dim
        context_dim = dim if context_dim is None else context_dim
        self.heads = heads
        self.wq = Parameter(kaiming_uniform(rng, (dim, inner), dim, slope=1.0, dtype=dtype))
        self.wk = Parameter(kaiming_uniform(rng, (context_dim, inner), context_dim, slope=1.0, dtype=dtype))
        self.wv = Parameter(kaiming_uniform(rng, (context_dim, inner), context_dim, slope=1.0, dtype=dtype))
        self.wo = Parameter(kaiming_uniform(rng, (inner, dim), inner, slope=1.0, dtype=dtype))

    def forward(self, x: Tensor, context: Tensor | None = None) -> Tensor:
        ctx = x if context is None else context
        return F.attention(x, ctx, ctx, self.wq, self.wk, self.wv, self.wo, self.heads)
