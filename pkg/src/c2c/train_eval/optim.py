"""Adam with bias correction and a cosine warm-restart schedule with linear warm-up."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, ShapeError


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    lr_max: float = 3e-4
    lr_min: float = 1e-6
    cycle_len_epochs: int = 30
    cycle_mult: float = 1.0
    warmup_epochs: float = 3.0
    seed: int = 0
    # learning-rate multiplier for the scalar fusion gate
    alpha_lr_scale: float = 1.0
    val_fraction: float = 0.08

    def __post_init__(self):
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0 <= self.lr_min < self.lr_max:
            raise ConfigError("need 0 <= lr_min < lr_max")
        if self.cycle_len_epochs < 1:
            raise ConfigError("cycle_len_epochs must be >= 1")
        if self.cycle_mult < 1.0:
            raise ConfigError("cycle_mult must be >= 1")
        if not 0 <= self.warmup_epochs < self.cycle_len_epochs:
            raise ConfigError("warmup_epochs must be in [0, cycle_len_epochs)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")


def lr_schedule(epoch: float, cfg: TrainConfig) -> float:
    if epoch < 0:
        raise ValueError("epoch must be non-negative")
    length = float(cfg.cycle_len_epochs)
    pos = float(epoch)
    while pos >= length:
        pos -= length
        length *= cfg.cycle_mult
    warm = cfg.warmup_epochs
    if pos < warm:
        return cfg.lr_min + (cfg.lr_max - cfg.lr_min) * pos / warm
    tau = (pos - warm) / (length - warm)
    return cfg.lr_min + 0.5 * (cfg.lr_max - cfg.lr_min) * (1.0 + math.cos(math.pi * tau))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(params: dict, state: AdamState, lr: float, lr_scale: dict | None = None) -> None:
    """One in-place Adam update of every parameter that has a gradient."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, p in params.items():
        g = p.grad
        if g is None:
            continue
        if g.shape != p.data.shape:
            raise ShapeError(f"{name}: gradient shape {g.shape} != parameter shape {p.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        step = lr * (lr_scale or {}).get(name, 1.0)
        p.data = p.data - step * (m / c1) / (np.sqrt(v / c2) + state.eps)
