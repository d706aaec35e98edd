"""Adam / AdamW over named parameters."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Parameter


@dataclass
class OptimizerState:
    """Moment estimates per parameter name plus hyper-parameters.

    ``mode="adam"`` adds ``weight_decay * w`` to the gradient; ``"adamw"``
    shrinks the weights directly before the moment update.
    """

    lr: float = 1e-3
    betas: tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    weight_decay: float = 0.0
    mode: str = "adamw"
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in ("adam", "adamw"):
            raise ValueError(f"unknown optimizer mode {self.mode!r}")


def optimizer_step(state: OptimizerState, params: dict[str, Parameter],
                   grads: dict[str, np.ndarray], lr: float | None = None) -> None:
    """One in-place update of ``params``; ``lr`` overrides ``state.lr`` for this step."""
    lr = state.lr if lr is None else lr
    if lr < 0:
        raise ValueError("learning rate must be >= 0")
    b1, b2 = state.betas
    state.step += 1
    t = state.step
    for name, p in params.items():
        g = np.asarray(grads[name], dtype=np.float64)
        if g.shape != p.shape:
            raise ValueError(f"{name}: gradient shape {g.shape} != parameter shape {p.shape}")
        w = p.data.astype(np.float64)
        if state.weight_decay:
            if state.mode == "adam":
                g = g + state.weight_decay * w
            else:
                w = w - lr * state.weight_decay * w
        m = state.m.get(name)
        v = state.v.get(name)
        m = (1 - b1) * g if m is None else b1 * m + (1 - b1) * g
        v = (1 - b2) * g * g if v is None else b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.assign(w - lr * m_hat / (np.sqrt(v_hat) + state.eps))
