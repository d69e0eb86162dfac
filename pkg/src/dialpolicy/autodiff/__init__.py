"""Small reverse-mode autodiff engine used by every model in the package."""
from .gumbel import EPS, gumbel_from_uniform, gumbel_sample, gumbel_softmax, gumbel_softmax_st
from .optim import SGD, Adam, Optimizer, make_optimizer
from .rng import Rng
from .tensor import (
    Graph,
    NonFiniteError,
    ShapeError,
    Tensor,
    active_graph,
    add,
    as_tensor,
    backward,
    concat,
    detach,
    div,
    exp,
    log,
    log_softmax,
    matmul,
    mean,
    mul,
    neg,
    one_hot_argmax,
    reshape,
    sigmoid,
    softmax,
    sqrt,
    straight_through,
    sub,
    take_slice,
    tanh,
    transpose,
    tsum,
)
