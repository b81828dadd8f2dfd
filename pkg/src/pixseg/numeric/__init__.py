"""Minimal float64 tensor library with reverse-mode autodiff."""

from .gradcheck import check_parameters, finite_diff_check
from .io import load_tensor, save_tensor, tensor_from_bytes, tensor_to_bytes
from .optim import AdamW, WarmupDecayLR
from .tensor import (
    MacCounter,
    Tape,
    Tensor,
    add,
    as_tensor,
    backward,
    broadcast_to,
    clip,
    concat,
    count_macs,
    div,
    exp,
    getitem,
    interp_matrix,
    layer_norm,
    linear,
    log,
    matmul,
    mean,
    mul,
    no_grad,
    relu,
    reshape,
    resize_bilinear,
    scale,
    sigmoid,
    softmax,
    stack,
    sub,
    sum_,
    swap_last,
    take,
    transpose,
)

__all__ = [
    "AdamW",
    "MacCounter",
    "Tape",
    "Tensor",
    "WarmupDecayLR",
    "add",
    "as_tensor",
    "backward",
    "broadcast_to",
    "check_parameters",
    "clip",
    "concat",
    "count_macs",
    "div",
    "exp",
    "finite_diff_check",
    "getitem",
    "interp_matrix",
    "layer_norm",
    "linear",
    "load_tensor",
    "log",
    "matmul",
    "mean",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "resize_bilinear",
    "save_tensor",
    "scale",
    "sigmoid",
    "softmax",
    "stack",
    "sub",
    "sum_",
    "swap_last",
    "take",
    "tensor_from_bytes",
    "tensor_to_bytes",
    "transpose",
]
