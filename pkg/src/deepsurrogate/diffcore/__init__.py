from . import tensor as ops
from .params import SGD, Adam, ParamSet, backward, make_optimizer, uniform_fan_in
from .tensor import (
    ShapeError,
    Tensor,
    UnsupportedOpError,
    add,
    affine,
    concat,
    constant,
    conv1d,
    div,
    exp,
    forward,
    grad,
    grad_graph,
    leaky_relu,
    log,
    log_softmax,
    l2norm,
    matmul,
    mean,
    mse,
    mul,
    no_grad,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    sqrt,
    square,
    sub,
    sum,
    tanh,
    tensor,
    transpose,
)

__all__ = [
    "ops",
    "Tensor",
    "ParamSet",
    "ShapeError",
    "UnsupportedOpError",
    "SGD",
    "Adam",
    "make_optimizer",
    "backward",
    "uniform_fan_in",
    "add",
    "affine",
    "concat",
    "constant",
    "conv1d",
    "div",
    "exp",
    "forward",
    "grad",
    "grad_graph",
    "leaky_relu",
    "log",
    "log_softmax",
    "l2norm",
    "matmul",
    "mean",
    "mse",
    "mul",
    "no_grad",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "softmax",
    "sqrt",
    "square",
    "sub",
    "sum",
    "tanh",
    "tensor",
    "transpose",
]
