from .core import (
    Parameter,
    Tensor,
    add,
    as_tensor,
    batch_norm,
    clamp_min,
    concat,
    detect_anomaly,
    div,
    dropout,
    exp,
    gelu,
    layer_norm,
    linear,
    log,
    log_softmax,
    masked_fill,
    matmul,
    mean,
    mul,
    power,
    no_grad,
    normalize,
    relu,
    getitem,
    reshape,
    softmax,
    sqrt,
    stack,
    sub,
    swapaxes,
    take_rows,
    transpose,
    tsum,
)
from .gradcheck import grad_check
from .nn import BatchNorm, Dropout, LayerNorm, Linear, Module

__all__ = [
    "Parameter", "Tensor", "add", "as_tensor", "batch_norm", "clamp_min", "concat", "detect_anomaly",
    "div", "dropout", "exp", "gelu", "layer_norm", "linear", "log", "log_softmax", "masked_fill",
    "matmul", "mean", "mul", "power", "swapaxes", "getitem", "no_grad", "normalize", "relu", "reshape", "softmax", "sqrt", "stack",
    "sub", "take_rows", "transpose", "tsum", "grad_check", "BatchNorm", "Dropout", "LayerNorm",
    "Linear", "Module",
]
