"""Minimal tensor library: autodiff core, layers, Adam, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm,
    Dense,
    DepthwiseConvTime,
    GraphConv,
    batch_norm,
    depthwise_conv_time,
    dropout,
    glorot_uniform,
    max_pool_time,
    softmax,
    softmax_cross_entropy,
)
from .optim import Adam
from .tensor import Tensor, matmul, no_grad, relu

__all__ = [
    "Adam",
    "BatchNorm",
    "Dense",
    "DepthwiseConvTime",
    "GraphConv",
    "Tensor",
    "batch_norm",
    "depthwise_conv_time",
    "dropout",
    "glorot_uniform",
    "load_checkpoint",
    "matmul",
    "max_pool_time",
    "no_grad",
    "relu",
    "save_checkpoint",
    "softmax",
    "softmax_cross_entropy",
]
