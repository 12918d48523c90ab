"""AdamW with bias correction and a cosine-annealed learning rate."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamWConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4


def lr_schedule(step: int, total_steps: int, base_lr: float) -> float:
    if not 0 <= step <= total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    if total_steps == 0:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * step / total_steps))


def optimizer_update(
    params: dict[str, np.ndarray],
    grads: dict[str, np.ndarray],
    moments: dict[str, tuple[np.ndarray, np.ndarray]],
    step: int,
    lr: float,
    cfg: AdamWConfig = AdamWConfig(),
):
    """One AdamW step; ``step`` counts completed updates (bias correction uses step + 1).

    Returns new (params, moments); inputs are left untouched.
    """
    t = step + 1
    new_params, new_moments = {}, {}
    for name, p in params.items():
        g = grads[name]
        m, v = moments[name]
        if g.shape != p.shape or m.shape != p.shape or v.shape != p.shape:
            raise ValueError(f"shape mismatch for {name}: param {p.shape}, grad {g.shape}")
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * g * g
        m_hat = m / (1.0 - cfg.beta1**t)
        v_hat = v / (1.0 - cfg.beta2**t)
        decayed = p - lr * cfg.weight_decay * p
        new_params[name] = decayed - lr * m_hat / (np.sqrt(v_hat) + cfg.eps)
        new_moments[name] = (m, v)
    return new_params, new_moments


def zero_moments(params: dict[str, np.ndarray]) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    return {k: (np.zeros_like(p), np.zeros_like(p)) for k, p in params.items()}
