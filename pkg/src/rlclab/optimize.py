"""Hand-rolled ADAM and the piecewise-constant learning-rate schedules."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np


class TrainingRole(Enum):
    SOURCE_FOURIER = "source-fourier"
    FINETUNE_FOURIER = "finetune-fourier"
    SOURCE_BASELINE = "source-baseline"
    FINETUNE_BASELINE = "finetune-baseline"


@dataclass(frozen=True)
class Schedule:
    """Ordered (epochs, learning rate) segments."""

    segments: tuple

    def __post_init__(self):
        if any(lr <= 0 for _, lr in self.segments):
            raise ValueError("learning rates must be positive")

    @property
    def total_epochs(self) -> int:
        return sum(n for n, _ in self.segments)

    def scaled(self, epoch_scale: float) -> "Schedule":
        """Same rates, epoch counts scaled (minimum 1 per segment)."""
        return Schedule(tuple((max(1, int(round(n * epoch_scale))), lr)
                              for n, lr in self.segments))


_SCHEDULES = {
    TrainingRole.SOURCE_FOURIER: Schedule(((300, 10.0), (300, 1e-3))),
    TrainingRole.FINETUNE_FOURIER: Schedule(((300, 0.1),)),
    TrainingRole.SOURCE_BASELINE: Schedule(((100_000, 1e-3),)),
    TrainingRole.FINETUNE_BASELINE: Schedule(((50_000, 1e-3),)),
}


def schedule_for(role: TrainingRole) -> Schedule:
    return _SCHEDULES[role]


@dataclass
class AdamState:
    """First/second moment vectors and the step counter."""

    m: np.ndarray
    v: np.ndarray
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params: np.ndarray, beta1: float = 0.9, beta2: float = 0.999,
                   eps: float = 1e-8) -> "AdamState":
        return cls(m=np.zeros_like(params), v=np.zeros_like(params),
                   beta1=beta1, beta2=beta2, eps=eps)


def adam_step(state: AdamState, params: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
    """One ADAM update with bias correction. Returns the updated parameters."""
    if not np.all(np.isfinite(grad)):
        raise FloatingPointError("non-finite gradient")
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    state.m = b1 * state.m + (1.0 - b1) * grad
    state.v = b2 * state.v + (1.0 - b2) * grad * grad
    m_hat = state.m / (1.0 - b1 ** state.step)
    v_hat = state.v / (1.0 - b2 ** state.step)
    return params - lr * m_hat / (np.sqrt(v_hat) + state.eps)
