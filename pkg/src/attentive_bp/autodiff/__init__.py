"""Small reverse-mode autodiff engine used by the attentive BP model."""

from .layers import Adjacency, gat_layer, gru_cell, init_gat, init_gru, uniform_init
from .optim import ParameterStore, adam_step
from .tensor import (
    ShapeError,
    Tensor,
    add,
    argmin_of,
    as_tensor,
    backward,
    concat,
    div,
    exp,
    getitem,
    leaky_relu,
    log,
    matmul,
    mean,
    min_select,
    mul,
    neg,
    pad_last,
    reshape,
    segment_softmax,
    segment_sum,
    sigmoid,
    softmax,
    sub,
    sum_,
    take,
    tanh,
    transpose,
)

__all__ = [
    "Adjacency",
    "ParameterStore",
    "ShapeError",
    "Tensor",
    "adam_step",
    "add",
    "argmin_of",
    "as_tensor",
    "backward",
    "concat",
    "div",
    "exp",
    "gat_layer",
    "getitem",
    "gru_cell",
    "init_gat",
    "init_gru",
    "leaky_relu",
    "log",
    "matmul",
    "mean",
    "min_select",
    "mul",
    "neg",
    "pad_last",
    "reshape",
    "segment_softmax",
    "segment_sum",
    "sigmoid",
    "softmax",
    "sub",
    "sum_",
    "take",
    "tanh",
    "transpose",
    "uniform_init",
]
