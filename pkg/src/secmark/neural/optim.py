"""Adam with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeError


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, lr=0.001, beta1=0.9, beta2=0.999, eps=1e-8,
              t=None) -> AdamState:
    """Update ``params`` (name -> ndarray) in place; missing gradients count as zero.

    ``t`` is the 1-based step number; by default the state's counter + 1.
    """
    t = state.t + 1 if t is None else int(t)
    if t < 1:
        raise ShapeError("Adam step number must be >= 1")
    c1 = 1.0 - beta1 ** t
    c2 = 1.0 - beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
            state.v[name] = np.zeros_like(p)
        v = state.v[name]
        if g is None:
            m *= beta1
            v *= beta2
        else:
            if g.shape != p.shape:
                raise ShapeError(f"gradient for {name}: shape mismatch {g.shape} vs {p.shape}")
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * (g * g)
        p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    state.t = t
    return state
