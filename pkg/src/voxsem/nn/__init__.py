"""Dense 3D convolution engine on numpy arrays.

Tensors are float arrays shaped (n, c, d, h, w); the three spatial axes
map to grid axes (x, y, z) in that order.
"""
from .ops import (
    add_forward, add_backward,
    concat_forward, concat_backward,
    conv3d_backward, conv3d_forward, conv3d_output_dims,
    pool3d_max_backward, pool3d_max_forward,
    relu_backward, relu_forward,
)
from .loss import LossOutput, weighted_softmax_loss
from .graph import LayerSpec, Network, NetworkSpec, init_params
from .optim import SgdOptimizer
from .rf import influence_set, receptive_field
from .checkpoint import read_checkpoint, write_checkpoint

__all__ = [
    "add_forward", "add_backward", "concat_forward", "concat_backward",
    "conv3d_backward", "conv3d_forward", "conv3d_output_dims",
    "pool3d_max_backward", "pool3d_max_forward",
    "relu_backward", "relu_forward",
    "LossOutput", "weighted_softmax_loss",
    "LayerSpec", "Network", "NetworkSpec", "init_params",
    "SgdOptimizer", "influence_set", "receptive_field",
    "read_checkpoint", "write_checkpoint",
]
