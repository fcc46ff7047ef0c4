"""Dense tensor library with reverse-mode autodiff and the layers the agents need.

Everything runs on numpy arrays, float32 by default and float64 for gradient
checking. No GPU, no dynamic shapes beyond what the six architectures use.
"""

from .autodiff import Tensor, tensor, parameter, no_grad, is_grad_enabled
from .autodiff import add, mul, matmul, relu, tanh, sigmoid, exp, log
from .autodiff import minimum, clip
from .autodiff import reshape, transpose, concat, tsum, tmean, softmax, log_softmax
from .autodiff import conv2d, layernorm, tile_batch, extract_patches
from .layers import linear, lstm_cell, attention, multi_head_attention
from .layers import residual_mlp, sinusoidal_pe, orthogonal, unit_gaussian
from .layers import conv_output_size, PatchSequence
from .optim import Adam, clip_grad_norm
from .checkpoint import save_checkpoint, load_checkpoint, config_digest, CheckpointError

__all__ = [
    "Tensor", "tensor", "parameter", "no_grad", "is_grad_enabled",
    "add", "mul", "matmul", "relu", "tanh", "sigmoid", "exp", "log",
    "minimum", "clip",
    "reshape", "transpose", "concat", "tsum", "tmean", "softmax", "log_softmax",
    "conv2d", "layernorm", "tile_batch", "extract_patches",
    "linear", "lstm_cell", "attention", "multi_head_attention",
    "residual_mlp", "sinusoidal_pe", "orthogonal", "unit_gaussian",
    "conv_output_size", "PatchSequence",
    "Adam", "clip_grad_norm",
    "save_checkpoint", "load_checkpoint", "config_digest", "CheckpointError",
]
