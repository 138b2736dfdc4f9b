"""Adam with bias correction and the one-cycle learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    ``dropout_p`` overrides the model config's dropout when not None, so a
    single architecture definition serves several presets.
    """

    epochs: int = 25
    batch_size: int = 64
    lr_max: float = 0.01
    dropout_p: float | None = None
    seed: int = 0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    warmup_frac: float = 0.3
    div_start: float = 25.0
    div_final: float = 1e4

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.lr_max <= 0:
            raise ValueError("epochs >= 1, batch_size >= 1, lr_max > 0 required")
        if not 0.0 < self.warmup_frac < 1.0:
            raise ValueError("warmup_frac must be in (0, 1)")
        if self.div_start <= 1.0 or self.div_final <= 1.0:
            raise ValueError("lr divisors must exceed 1")


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def init_adam(params: dict[str, np.ndarray]) -> AdamState:
    return AdamState(
        m={k: np.zeros_like(p) for k, p in params.items()},
        v={k: np.zeros_like(p) for k, p in params.items()},
        t=0,
    )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> AdamState:
    """One bias-corrected Adam update, applied to ``params`` in place."""
    state.t += 1
    bc1 = 1.0 - beta1 ** state.t
    bc2 = 1.0 - beta2 ** state.t
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        m = state.m[name]
        v = state.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return state


def one_cycle_lr(step: int, total_steps: int, lr_max: float, *,
                 div_start: float = 25.0, div_final: float = 1e4,
                 warmup_frac: float = 0.3) -> float:
    """Cosine warmup to ``lr_max`` then cosine anneal down to
    ``lr_max / div_final``.

    The first step sits exactly at ``lr_max / div_start``, the warmup
    boundary exactly at ``lr_max``, and the final step at
    ``lr_max / div_final``.
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    if total_steps == 1:
        return lr_max
    lr_start = lr_max / div_start
    lr_final = lr_max / div_final
    peak = int(round(warmup_frac * (total_steps - 1)))
    if step <= peak:
        u = 1.0 if peak == 0 else step / peak
        return lr_start + (lr_max - lr_start) * 0.5 * (1.0 - np.cos(np.pi * u))
    v = (step - peak) / (total_steps - 1 - peak)
    return lr_final + (lr_max - lr_final) * 0.5 * (1.0 + np.cos(np.pi * v))
