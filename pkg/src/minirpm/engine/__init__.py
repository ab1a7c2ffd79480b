from .tensor import (
    Tape,
    Tensor,
    add,
    bce_with_logits,
    dropout,
    flatten,
    linear,
    mean_over,
    relu,
    repeat_rows,
    reshape,
    scale,
    sigmoid,
    sub,
    take_rows,
    tensor,
)
from .conv import avgpool_to, batchnorm2d, conv2d, maxpool2d
from .gradcheck import GradCheckResult, grad_check
from .nn import Parameter, adam_step, load_checkpoint, save_checkpoint

__all__ = [
    "Tape",
    "Tensor",
    "tensor",
    "add",
    "sub",
    "scale",
    "relu",
    "sigmoid",
    "mean_over",
    "flatten",
    "reshape",
    "take_rows",
    "repeat_rows",
    "linear",
    "dropout",
    "bce_with_logits",
    "conv2d",
    "maxpool2d",
    "avgpool_to",
    "batchnorm2d",
    "grad_check",
    "GradCheckResult",
    "Parameter",
    "adam_step",
    "save_checkpoint",
    "load_checkpoint",
]
