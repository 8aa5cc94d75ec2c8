"""Minimal tensor library: autograd, NN primitives, Adam, weight I/O."""

from swinauth.tensor.core import (
    Tensor,
    as_tensor,
    concat,
    default_dtype,
    exp,
    is_grad_enabled,
    log,
    matmul,
    mean,
    no_grad,
    pad,
    precision,
    relu,
    reshape,
    roll,
    set_default_dtype,
    sigmoid,
    sqrt,
    tanh,
    transpose,
    tsum,
)
from swinauth.tensor.functional import channel_norm, conv2d, gelu, layer_norm, linear, softmax
from swinauth.tensor.init import he_normal_init, truncated_normal
from swinauth.tensor.optim import AdamState, adam_step
from swinauth.tensor.serialize import load_weights, save_weights


def backward(loss: Tensor, retain_graph: bool = True) -> None:
    """Populate ``.grad`` on everything ``loss`` depends on."""
    loss.backward(retain_graph=retain_graph)


__all__ = [
    "AdamState",
    "Tensor",
    "adam_step",
    "as_tensor",
    "backward",
    "channel_norm",
    "concat",
    "conv2d",
    "default_dtype",
    "exp",
    "gelu",
    "he_normal_init",
    "is_grad_enabled",
    "layer_norm",
    "linear",
    "load_weights",
    "log",
    "matmul",
    "mean",
    "no_grad",
    "pad",
    "precision",
    "relu",
    "reshape",
    "roll",
    "save_weights",
    "set_default_dtype",
    "sigmoid",
    "softmax",
    "sqrt",
    "tanh",
    "transpose",
    "truncated_normal",
    "tsum",
]
