"""Mini-batch training loop with per-epoch validation checkpointing."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..dataset import WindowDataset
from ..trace import standardize_rows
from .model import ConvNet1d, ModelConfig
from .optim import AdamState, TrainConfig, adam_step, init_adam, one_cycle_lr

_EVAL_BATCH = 256


@dataclass(frozen=True)
class EpochMetrics:
    epoch: int
    train_loss: float
    val_loss: float
    val_accuracy: float
    lr_last: float


def evaluate(model: ConvNet1d, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Mean cross-entropy and accuracy on pre-standardized windows."""
    total_nll = 0.0
    correct = 0
    for lo in range(0, x.shape[0], _EVAL_BATCH):
        probs = model.forward(x[lo : lo + _EVAL_BATCH], train=False)
        yb = y[lo : lo + _EVAL_BATCH]
        total_nll -= float(np.log(np.maximum(probs[np.arange(len(yb)), yb], 1e-300)).sum())
        correct += int((probs.argmax(axis=1) == yb).sum())
    return total_nll / x.shape[0], correct / x.shape[0]


def train(dataset: WindowDataset, mcfg: ModelConfig, tcfg: TrainConfig,
          dtype=np.float32) -> tuple[ConvNet1d, list[EpochMetrics]]:
    """Train with Adam + one-cycle and return the checkpoint with the lowest
    validation loss (earliest epoch on ties) plus per-epoch metrics.

    float32 math is the default; pass float64 when gradient-level
    reproducibility across dtypes matters more than speed."""
    if dataset.n != mcfg.input_len:
        raise ValueError(f"dataset window size {dataset.n} != model input_len {mcfg.input_len}")
    x_train, y_train = dataset.subset("train")
    if x_train.shape[0] == 0:
        raise ValueError("training split is empty")
    x_valid, y_valid = dataset.subset("valid")
    x_train = standardize_rows(x_train)
    x_valid = standardize_rows(x_valid) if x_valid.shape[0] else x_valid

    if tcfg.dropout_p is not None:
        mcfg = replace(mcfg, dropout_p=tcfg.dropout_p)
    rng = np.random.default_rng(tcfg.seed)
    model = ConvNet1d(mcfg, rng, dtype=dtype)
    params = model.named_parameters()
    state: AdamState = init_adam(params)

    n_train = x_train.shape[0]
    steps_per_epoch = math.ceil(n_train / tcfg.batch_size)
    total_steps = steps_per_epoch * tcfg.epochs
    step = 0
    best_loss = math.inf
    best_model = model.clone()
    metrics: list[EpochMetrics] = []
    for epoch in range(tcfg.epochs):
        order = rng.permutation(n_train)
        epoch_losses = []
        lr = tcfg.lr_max
        for lo in range(0, n_train, tcfg.batch_size):
            idx = order[lo : lo + tcfg.batch_size]
            lr = one_cycle_lr(step, total_steps, tcfg.lr_max,
                              div_start=tcfg.div_start, div_final=tcfg.div_final,
                              warmup_frac=tcfg.warmup_frac)
            loss, grads = model.loss_and_grad(x_train[idx], y_train[idx], rng=rng)
            adam_step(params, grads, state, lr,
                      beta1=tcfg.adam_beta1, beta2=tcfg.adam_beta2, eps=tcfg.adam_eps)
            epoch_losses.append(loss)
            step += 1
        if x_valid.shape[0]:
            val_loss, val_acc = evaluate(model, x_valid, y_valid)
        else:
            val_loss, val_acc = float(np.mean(epoch_losses)), float("nan")
        metrics.append(EpochMetrics(epoch, float(np.mean(epoch_losses)), val_loss, val_acc, lr))
        if val_loss < best_loss:
            best_loss = val_loss
            best_model = model.clone()
    return best_model, metrics
