"""Reverse-mode differentiation, AdamW, and the finite-difference oracle."""

from .gradcheck import GradCheckReport, finite_diff_check, relative_error
from .optim import DEFAULT_LR, AdamWState, adamw_step
from .tape import (
    Tensor,
    add,
    backward,
    const,
    cross_entropy,
    gelu,
    layer_norm,
    linear_terms,
    matmul,
    mean_all,
    mul,
    param,
    reshape,
    softmax,
    square,
    sub,
    sum_all,
    transpose,
    upsample_nearest,
)

__all__ = [
    "AdamWState", "DEFAULT_LR", "GradCheckReport", "Tensor", "adamw_step", "add",
    "backward", "const", "cross_entropy", "finite_diff_check", "gelu", "layer_norm",
    "linear_terms", "matmul", "mean_all", "mul", "param", "relative_error", "reshape",
    "softmax", "square", "sub", "sum_all", "transpose", "upsample_nearest",
]
