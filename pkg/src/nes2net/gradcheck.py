"""Finite-difference gradient check of a whole model, reported per layer."""
from __future__ import annotations

from collections import defaultdict

import numpy as np

from . import core
from .models import Model
from .training.losses import FocalLossConfig, focal_loss

THRESHOLD = 1e-5
MAX_PARAMS = 20_000


def layer_of(param_name: str) -> str:
    """Owning module of a parameter, e.g. ``trunk.nested.0.groups.1.conv``."""
    return param_name.rsplit(".", 1)[0]


def model_grad_check(model: Model, x: np.ndarray, labels: np.ndarray, eps: float = 1e-5,
                     max_params: int = MAX_PARAMS) -> dict[str, float]:
    """Max relative error of every parameter gradient, grouped by layer.

    The loss is the batch focal loss in training mode, so batch-norm
    statistics are part of the checked graph.  Errors use
    ``|analytic - numeric| / max(1, |analytic|)``.
    """
    if model.config.dtype != "f64":
        raise TypeError("gradient checks need an f64 model")
    n = model.num_parameters()
    if n > max_params:
        raise ValueError(f"model has {n} parameters; the cap for finite differences is {max_params}")
    names, params = zip(*model.named_parameters())
    x = core.Tensor(x, dtype="f64")
    labels = np.asarray(labels)
    cfg = FocalLossConfig()

    def loss(*_):
        return focal_loss(model(x), labels, cfg)

    model.train()
    errors = core.grad_check(loss, list(params), eps=eps, per_input=True)
    by_layer: dict[str, float] = defaultdict(float)
    for name, err in zip(names, errors):
        layer = layer_of(name)
        by_layer[layer] = max(by_layer[layer], err)
    return dict(by_layer)


def check_inputs(model: Model, frames: int, seed: int, batch: int = 2):
    """Random probe batch with both classes present."""
    cfg = model.config
    rng = np.random.default_rng(seed)
    shape = (batch,) + ((cfg.frontend_layers,) if cfg.frontend_layers else ()) + (cfg.input_dim, frames)
    x = rng.standard_normal(shape)
    labels = np.arange(batch) % 2
    return x, labels
