"""CNN-RNN network with hand-derived gradients."""
from .cells import CELLS, cell_step
from .checkpoint import load_checkpoint, save_checkpoint
from .gradcheck import grad_check, layer_checks, tiny_config, tiny_problem
from .model import (NetConfig, NetParams, cnn_forward, cnn_forward_batch, init_params, loss_and_grads,
                    predict, predict_proba, rnn_forward, sequence_features, zero_params)
from .train import train_two_step

__all__ = [
    "CELLS", "NetConfig", "NetParams", "cell_step", "cnn_forward", "cnn_forward_batch", "grad_check",
    "init_params", "layer_checks", "load_checkpoint", "loss_and_grads", "predict", "predict_proba",
    "rnn_forward", "save_checkpoint", "sequence_features", "tiny_config", "tiny_problem",
    "train_two_step", "zero_params",
]
