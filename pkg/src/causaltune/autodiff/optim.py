"""AdamW with decoupled weight decay and bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ValidationError

DEFAULT_LR = 1e-4


@dataclass
class AdamWState:
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.01
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adamw_step(params: dict, grads: dict, state: AdamWState):
    """One optimizer step. Returns (new_params, new_state); inputs are not modified."""
    if set(params) != set(grads):
        raise ValidationError(
            f"gradient keys {sorted(grads)} do not match parameters {sorted(params)}"
        )
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    new_params, new_m, new_v = {}, {}, {}
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        p = np.asarray(p, dtype=np.float64)
        if g.shape != p.shape:
            raise ValidationError(f"gradient for {name!r} has shape {g.shape}, expected {p.shape}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        if m.shape != p.shape or v.shape != p.shape:
            raise ValidationError(f"moment shape mismatch for {name!r}")
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        m_hat = m / (1.0 - b1**t)
        v_hat = v / (1.0 - b2**t)
        p = p * (1.0 - state.lr * state.weight_decay)
        new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    return new_params, replace(state, t=t, m=new_m, v=new_v)
