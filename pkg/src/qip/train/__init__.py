from .checkpoint import checkpoint_bytes, load_checkpoint, save_checkpoint, state_from_bytes
from .losses import LossReport, QipOptions, ce_loss, qip_objective
from .loop import TrainState, accuracy, fit, loss_and_grads, qip_step
from .mlp import Mlp, forward_features, mlp_backward, mlp_forward
from .optim import AdamWConfig, lr_schedule, optimizer_update, zero_moments

__all__ = [
    "AdamWConfig",
    "LossReport",
    "Mlp",
    "QipOptions",
    "TrainState",
    "accuracy",
    "ce_loss",
    "checkpoint_bytes",
    "fit",
    "forward_features",
    "load_checkpoint",
    "loss_and_grads",
    "lr_schedule",
    "mlp_backward",
    "mlp_forward",
    "optimizer_update",
    "qip_objective",
    "qip_step",
    "save_checkpoint",
    "state_from_bytes",
    "zero_moments",
]
