"""Self-contained differentiable compute layer for the denoiser."""

from .layers import (
    LN_EPS,
    TIME_FREQS,
    conv1d_circ,
    conv1d_circ_bwd,
    layer_norm,
    layer_norm_bwd,
    silu,
    silu_bwd,
    time_features,
)
from .model import (
    DenoiserConfig,
    backward,
    denoise,
    forward,
    init_params,
    loss_and_grads,
    param_count,
    zeros_like_params,
)
from .optim import AdamState, adam_init, adam_step, ema_update

__all__ = [
    "LN_EPS",
    "TIME_FREQS",
    "AdamState",
    "DenoiserConfig",
    "adam_init",
    "adam_step",
    "backward",
    "conv1d_circ",
    "conv1d_circ_bwd",
    "denoise",
    "ema_update",
    "forward",
    "init_params",
    "layer_norm",
    "layer_norm_bwd",
    "loss_and_grads",
    "param_count",
    "silu",
    "silu_bwd",
    "time_features",
    "zeros_like_params",
]
