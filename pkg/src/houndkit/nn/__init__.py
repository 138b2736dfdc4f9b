"""From-scratch 1D convolutional classifier: layers, model, optimizer,
training loop, and serialization."""

from .io import MDL_FORMAT, load_model, save_model
from .layers import ShapeError, softmax
from .model import ConvNet1d, ModelConfig, forward, loss_and_grad, predict_batch
from .optim import AdamState, TrainConfig, adam_step, init_adam, one_cycle_lr
from .train import EpochMetrics, evaluate, train

__all__ = [
    "MDL_FORMAT",
    "AdamState",
    "ConvNet1d",
    "EpochMetrics",
    "ModelConfig",
    "ShapeError",
    "TrainConfig",
    "adam_step",
    "evaluate",
    "forward",
    "init_adam",
    "load_model",
    "loss_and_grad",
    "one_cycle_lr",
    "predict_batch",
    "save_model",
    "softmax",
    "train",
]
