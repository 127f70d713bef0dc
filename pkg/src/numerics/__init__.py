from .tensor import Tensor, Tape, TapeRecord, no_grad, record_op, current_tape
from .ops import (
    add,
    sub,
    mul,
    scale,
    sum,
    mean,
    reshape,
    transpose,
    matmul,
    take_rows,
    scatter_rows,
    pick,
    softmax,
    log_softmax,
    log_sigmoid,
    softplus,
    gelu,
    layer_norm,
    masked_fill_bias,
    sigmoid_array,
    LAYER_NORM_EPS,
    MASK_VALUE,
)
from .gradcheck import GradientReport, check_gradients

__all__ = [
    "Tensor",
    "Tape",
    "TapeRecord",
    "no_grad",
    "record_op",
    "current_tape",
    "add",
    "sub",
    "mul",
    "scale",
    "sum",
    "mean",
    "reshape",
    "transpose",
    "matmul",
    "take_rows",
    "scatter_rows",
    "pick",
    "softmax",
    "log_softmax",
    "log_sigmoid",
    "softplus",
    "gelu",
    "layer_norm",
    "masked_fill_bias",
    "sigmoid_array",
    "LAYER_NORM_EPS",
    "MASK_VALUE",
    "GradientReport",
    "check_gradients",
]
