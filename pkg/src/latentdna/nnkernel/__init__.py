"""Tensor, layer, autodiff and optimiser substrate for the VAE and UNet."""
from . import checkpoint, functional
from .functional import (
    attention,
    batchnorm,
    conv1d,
    conv2d,
    cross_entropy,
    group_norm,
    leaky_relu,
    linear,
    maxpool1d,
    sigmoid,
    softmax,
    swish,
    transposed_conv2d,
    upsample_nearest,
)
from .gradcheck import gradcheck, numerical_grad, relative_error
from .layers import (
    BatchNorm,
    Conv1d,
    Conv2d,
    ConvTranspose2d,
    GroupNorm,
    Linear,
    Module,
    MultiHeadAttention,
    Parameter,
    kaiming_uniform,
)
from .optim import Adam, adam_step, cosine_warmup_lr
from .tensor import DimensionError, NonFiniteError, Tensor, check_finite, concat, no_grad, split, tensor

__all__ = [
    "Adam", "BatchNorm", "Conv1d", "Conv2d", "ConvTranspose2d", "DimensionError", "GroupNorm", "Linear",
    "Module", "MultiHeadAttention", "NonFiniteError", "Parameter", "Tensor", "adam_step", "attention",
    "batchnorm", "check_finite", "checkpoint", "concat", "conv1d", "conv2d", "cosine_warmup_lr",
    "cross_entropy", "functional", "gradcheck", "group_norm", "kaiming_uniform", "leaky_relu", "linear",
    "maxpool1d", "no_grad", "numerical_grad", "relative_error", "sigmoid", "softmax", "split", "swish",
    "tensor", "transposed_conv2d", "upsample_nearest",
]
