"""Classification losses on two-class logits (index 1 is bona fide)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import core
from ..core import Tensor
from ..models import BONAFIDE


@dataclass(frozen=True)
class FocalLossConfig:
    gamma: float = 2.0
    alpha: float | None = 0.25   # None disables class weighting

    def __post_init__(self):
        if self.gamma < 0:
            raise ValueError("gamma must be >= 0")
        if self.alpha is not None and not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")


def _labels(labels, batch: int) -> np.ndarray:
    lab = np.asarray(labels, dtype=np.int64).reshape(-1)
    if lab.size != batch:
        raise ValueError(f"{lab.size} labels for a batch of {batch}")
    return lab


def _true_class_logprob(logits: Tensor, labels) -> tuple[Tensor, np.ndarray]:
    if not np.isfinite(logits.data).all():
        raise core.NonFiniteError("loss: non-finite logits")
    batched = logits if logits.ndim == 2 else core.reshape(logits, (1, -1))
    lab = _labels(labels, batched.shape[0])
    onehot = np.zeros(batched.shape, dtype=batched.dtype)
    onehot[np.arange(lab.size), lab] = 1
    logp = core.reduce_sum(core.mul(core.log_softmax(batched, axis=1), onehot), axis=1)
    return logp, lab


def focal_loss(logits: Tensor, labels, cfg: FocalLossConfig = FocalLossConfig()) -> Tensor:
    """Mean binary focal loss ``-w_t (1 - p_t)^gamma log p_t``.

    ``w_t`` is ``alpha`` for bona fide targets and ``1 - alpha`` for spoof.
    """
    logp, lab = _true_class_logprob(logits, labels)
    p = core.exp(logp)
    one = np.ones(p.shape, dtype=p.dtype)
    term = core.mul(core.power(core.sub(one, p), cfg.gamma), logp) if cfg.gamma else logp
    if cfg.alpha is not None:
        w = np.where(lab == BONAFIDE, cfg.alpha, 1 - cfg.alpha).astype(p.dtype)
        term = core.mul(term, w)
    return core.neg(core.reduce_mean(term))


def weighted_ce(logits: Tensor, labels, class_weights=(1.0, 1.0)) -> Tensor:
    """Mean of ``-w_label log softmax(logits)_label``."""
    w = np.asarray(class_weights, dtype=np.float64)
    if not np.isfinite(w).all() or np.any(w <= 0):
        raise ValueError("class weights must be finite and positive")
    logp, lab = _true_class_logprob(logits, labels)
    return core.neg(core.reduce_mean(core.mul(logp, w[lab].astype(logp.dtype))))
