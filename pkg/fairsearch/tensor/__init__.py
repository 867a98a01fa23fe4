from fairsearch.tensor.functional import (
    activation,
    add,
    batch_norm2d,
    concat,
    conv2d,
    crop,
    global_avg_pool,
    linear,
    mean_all,
    mul,
    pool2d,
    relu,
    reshape,
    scale,
    sigmoid,
    softmax,
    sum_all,
    take_row,
    weighted_sum,
)
from fairsearch.tensor.grad_check import grad_check
from fairsearch.tensor.tensor import (
    Function,
    Tape,
    Tensor,
    backward,
    get_default_dtype,
    parameter,
    precision,
    set_default_dtype,
    zeros,
)

__all__ = [
    "Tensor",
    "Tape",
    "Function",
    "backward",
    "parameter",
    "zeros",
    "precision",
    "get_default_dtype",
    "set_default_dtype",
    "grad_check",
    "activation",
    "add",
    "batch_norm2d",
    "concat",
    "conv2d",
    "crop",
    "global_avg_pool",
    "linear",
    "mean_all",
    "mul",
    "pool2d",
    "relu",
    "reshape",
    "scale",
    "sigmoid",
    "softmax",
    "sum_all",
    "take_row",
    "weighted_sum",
]
