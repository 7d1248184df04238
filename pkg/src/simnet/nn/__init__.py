"""Minimal dense-tensor math with reverse-mode autodiff, layers, and Adam."""

from .tensor import Tensor, add, concat, matmul, max_over_axis, mean, mul, relu, reshape, sigmoid, softmax, sub, tensor_sum, transpose
from .layers import Affine, BatchNorm, Conv2d, Dropout, GlobalAvgPool, ReLU, SetMaxPool, Sigmoid, Softmax, set_max_pool
from .losses import bce_on_sigmoid, loss, softmax_cross_entropy
from .optim import AdamState, adam_step, step_lr
from .params import ParameterStore, load_checkpoint, save_checkpoint
from .gradcheck import GradCheckResult, as_check_tensors, check_gradients

__all__ = [
    "Tensor", "add", "concat", "matmul", "max_over_axis", "mean", "mul", "relu",
    "reshape", "sigmoid", "softmax", "sub", "tensor_sum", "transpose",
    "Affine", "BatchNorm", "Conv2d", "Dropout", "GlobalAvgPool", "ReLU",
    "SetMaxPool", "Sigmoid", "Softmax", "set_max_pool",
    "bce_on_sigmoid", "loss", "softmax_cross_entropy",
    "AdamState", "adam_step", "step_lr",
    "ParameterStore", "load_checkpoint", "save_checkpoint",
    "GradCheckResult", "as_check_tensors", "check_gradients",
]
