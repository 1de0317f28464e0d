from .autodiff import Tensor, as_tensor, avg_pool3d, concat, conv3d, no_grad, pdist, standardize
from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .nn import Encoder, EncoderConfig, LinearHead, forward_encoder, init_encoder_params, linear_head
from .optim import OptimizerState, adamw_step, exp_lr

__all__ = [
    "Tensor",
    "as_tensor",
    "avg_pool3d",
    "concat",
    "conv3d",
    "no_grad",
    "pdist",
    "standardize",
    "Checkpoint",
    "load_checkpoint",
    "save_checkpoint",
    "Encoder",
    "EncoderConfig",
    "LinearHead",
    "forward_encoder",
    "init_encoder_params",
    "linear_head",
    "OptimizerState",
    "adamw_step",
    "exp_lr",
]
