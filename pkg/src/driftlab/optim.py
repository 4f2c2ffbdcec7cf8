"""Decoupled-weight-decay Adam with linear warmup into cosine annealing.

The schedule ramps linearly from 0 to the base rate over the first
``warmup_fraction`` of the run's total steps, then follows half a cosine
down to 0. Warmup is measured in optimizer steps over the whole run.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from .errors import NonfiniteGradientError, ShapeMismatchError


@dataclass(frozen=True)
class OptimizerConfig:
    total_steps: int
    base_lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.99
    epsilon: float = 1e-8
    weight_decay: float = 0.2
    warmup_fraction: float = 0.2

    def __post_init__(self):
        if self.total_steps < 1:
            raise ShapeMismatchError(f"total_steps must be >= 1, got {self.total_steps}")
        if not 0.0 <= self.warmup_fraction < 1.0:
            raise ShapeMismatchError(
                f"warmup_fraction must be in [0, 1), got {self.warmup_fraction}"
            )

    @property
    def warmup_steps(self) -> int:
        return int(round(self.warmup_fraction * self.total_steps))


def lr_at(step: int, config: OptimizerConfig) -> float:
    """Learning rate for a given optimizer step in [0, total_steps]."""
    w = config.warmup_steps
    if step < w:
        return config.base_lr * step / w
    span = config.total_steps - w
    progress = (step - w) / span if span > 0 else 1.0
    return config.base_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


@dataclass
class OptimizerState:
    """First/second moment mirrors of one parameter list plus the step count.

    Owned and mutated by exactly one training loop.
    """

    config: OptimizerConfig
    first_moment: List[np.ndarray]
    second_moment: List[np.ndarray]
    step: int = 0


def init_state(params: Sequence[np.ndarray], config: OptimizerConfig) -> OptimizerState:
    return OptimizerState(
        config,
        [np.zeros_like(p) for p in params],
        [np.zeros_like(p) for p in params],
    )


def adamw_step(
    params: Sequence[np.ndarray],
    grads: Sequence[np.ndarray],
    state: OptimizerState,
) -> None:
    """One in-place update of every parameter array.

    The learning rate is taken from the schedule at the pre-increment step
    index (so the very first update uses lr_at(0)); weight decay is applied
    as theta -= lr * wd * theta before the Adam delta; moments use the
    standard bias correction.
    """
    if len(params) != len(grads):
        raise ShapeMismatchError(f"{len(params)} params vs {len(grads)} grads")
    cfg = state.config
    lr = lr_at(state.step, cfg)
    state.step += 1
    t = state.step
    bc1 = 1.0 - cfg.beta1**t
    bc2 = 1.0 - cfg.beta2**t
    for p, g, m, v in zip(params, grads, state.first_moment, state.second_moment):
        if p.shape != g.shape:
            raise ShapeMismatchError(f"param {p.shape} vs grad {g.shape}")
        if not np.all(np.isfinite(g)):
            raise NonfiniteGradientError("gradient contains NaN or Inf")
        if cfg.weight_decay != 0.0:
            p -= lr * cfg.weight_decay * p
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * g * g
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + cfg.epsilon)
