# app/engine/__init__.py
# 텐서/자동미분 엔진의 공개 API

from .functional import (
    LAYER_OPS,
    add,
    avgpool2d,
    conv2d,
    dense,
    flatten,
    forward,
    maxpool2d,
    relu,
    reshape,
    softmax_cross_entropy,
    sum_squares,
    upsample_nearest,
)
from .gradcheck import grad_check
from .optim import SGD, sgd_step
from .tensor import Tape, Tensor, record_op

__all__ = [
    "Tensor",
    "Tape",
    "record_op",
    "LAYER_OPS",
    "forward",
    "conv2d",
    "dense",
    "relu",
    "maxpool2d",
    "avgpool2d",
    "flatten",
    "reshape",
    "upsample_nearest",
    "add",
    "sum_squares",
    "softmax_cross_entropy",
    "grad_check",
    "SGD",
    "sgd_step",
]
