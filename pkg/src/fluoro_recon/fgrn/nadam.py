"""NAdam: Adam with Nesterov momentum and Dozat's momentum warm-up schedule."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class NadamConfig:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    momentum_decay: float = 4e-3


@dataclass
class OptimizerState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    step: int = 0
    mu_product: float = 1.0

    @classmethod
    def zeros_like(cls, params) -> "OptimizerState":
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()})


def momentum_coefficient(t: int, cfg: NadamConfig) -> float:
    return cfg.beta1 * (1.0 - 0.5 * 0.96 ** (t * cfg.momentum_decay))


def nadam_step(params: dict, grads: dict, state: OptimizerState, cfg: NadamConfig = NadamConfig()):
    """Return ``(new_params, new_state)``; inputs are left untouched."""
    t = state.step + 1
    mu_t = momentum_coefficient(t, cfg)
    mu_next = momentum_coefficient(t + 1, cfg)
    mu_prod = state.mu_product * mu_t
    bias2 = 1.0 - cfg.beta2**t
    new_params, new_m, new_v = {}, {}, {}
    for k, theta in params.items():
        g = grads[k]
        m = cfg.beta1 * state.m[k] + (1.0 - cfg.beta1) * g
        v = cfg.beta2 * state.v[k] + (1.0 - cfg.beta2) * g * g
        denom = np.sqrt(v / bias2) + cfg.eps
        new_params[k] = (
            theta
            - cfg.lr * (1.0 - mu_t) / (1.0 - mu_prod) * g / denom
            - cfg.lr * mu_next / (1.0 - mu_prod * mu_next) * m / denom
        )
        new_m[k], new_v[k] = m, v
    return new_params, OptimizerState(new_m, new_v, t, mu_prod)
