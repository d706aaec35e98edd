"""Mini-batch training loop with dev-set checkpoint tracking."""
from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import core
from ..evaluation import ScoreSet, compute_eer
from ..models import Model
from ..seeding import rng_for
from .checkpoint import Checkpoint
from .data import Dataset
from .losses import FocalLossConfig, focal_loss, weighted_ce
from .optim import OptimizerState, optimizer_step
from .schedule import CosineCycleSchedule

log = logging.getLogger(__name__)


class DivergenceError(FloatingPointError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    batch_size: int = 32
    optimizer: str = "adamw"
    lr: float = 1e-3
    lr_min: float = 1e-9
    cycle_length: float = 10
    weight_decay: float = 1e-4
    loss: str = "focal"
    focal_gamma: float = 2.0
    focal_alpha: float = 0.25
    class_weights: tuple[float, float] = (1.0, 1.0)
    top_k: int = 3
    patience: int = 0            # 0 disables early stopping
    selection: str = "best_dev"  # or "min_lr"

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.top_k < 1 or self.patience < 0:
            raise ValueError("epochs >= 0, batch_size >= 1, top_k >= 1, patience >= 0 required")
        if self.loss not in ("focal", "wce"):
            raise ValueError("loss must be 'focal' or 'wce'")
        if self.selection not in ("best_dev", "min_lr"):
            raise ValueError("selection must be 'best_dev' or 'min_lr'")

    def schedule(self) -> CosineCycleSchedule:
        return CosineCycleSchedule(self.lr, self.lr_min, self.cycle_length)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    dev_eer: float

    def line(self) -> str:
        return f"{self.epoch}\t{self.lr:.6e}\t{self.train_loss:.8f}\t{self.dev_eer:.6f}"


@dataclass
class TrainResult:
    model: Model
    log: list[EpochLog]
    top: list[Checkpoint] = field(default_factory=list)   # best dev first
    best: Checkpoint | None = None
    stopped_early: bool = False

    def log_text(self) -> str:
        return "epoch\tlr\ttrain_loss\tdev_eer\n" + "".join(e.line() + "\n" for e in self.log)


def config_hash(model: Model) -> str:
    text = repr(sorted(asdict(model.config).items()))
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def to_checkpoint(model: Model, **meta) -> Checkpoint:
    entries = {k: np.array(v, copy=True) for k, v in model.state().items()}
    meta = {k: str(v) for k, v in meta.items()}
    meta.setdefault("config_hash", config_hash(model))
    meta.setdefault("variant", model.config.variant)
    return Checkpoint(entries, meta)


def score_dataset(model: Model, data: Dataset, batch_size: int = 64) -> ScoreSet:
    model.eval()
    scores = []
    for start in range(0, len(data), batch_size):
        scores.append(model.score(data.features[start:start + batch_size]))
    return ScoreSet.from_arrays(data.utt_ids, data.keys, data.attacks, np.concatenate(scores))


def _loss(cfg: TrainConfig, logits, labels):
    if cfg.loss == "focal":
        return focal_loss(logits, labels, FocalLossConfig(cfg.focal_gamma, cfg.focal_alpha))
    return weighted_ce(logits, labels, cfg.class_weights)


def train(model: Model, train_data: Dataset, dev_data: Dataset, cfg: TrainConfig,
          seed: int = 0, on_epoch=None) -> TrainResult:
    """Train in place; deterministic given ``seed``.

    The learning rate follows the cyclic cosine schedule per epoch.  The
    ``top_k`` dev-EER checkpoints are retained.  ``best`` is the best dev
    checkpoint overall, or with ``selection="min_lr"`` the best among the
    epochs at each cycle minimum and their two neighbours.  ``on_epoch`` is
    called with each :class:`EpochLog` as soon as the epoch finishes.
    """
    schedule = cfg.schedule()
    opt = OptimizerState(lr=cfg.lr, weight_decay=cfg.weight_decay, mode=cfg.optimizer)
    shuffle = rng_for(seed, "train.shuffle")
    params = dict(model.named_parameters())
    result = TrainResult(model, [])
    candidates: list[tuple[float, int, Checkpoint]] = []
    best_eer, stale = math.inf, 0
    n_batches = len(train_data) // cfg.batch_size
    for epoch in range(cfg.epochs):
        lr = schedule.lr_at(epoch)
        model.train()
        order = shuffle.permutation(len(train_data))
        total = 0.0
        for b in range(n_batches):
            idx = order[b * cfg.batch_size:(b + 1) * cfg.batch_size]
            # overflow surfaces as NonFiniteError from the finite checks, not as warnings
            try:
                with np.errstate(over="ignore", invalid="ignore"), core.recording() as tape:
                    logits = model(train_data.features[idx])
                    loss = _loss(cfg, logits, train_data.labels[idx])
                if not math.isfinite(loss.item()):
                    raise core.NonFiniteError("loss")
                grads = core.backward(tape, loss)
            except core.NonFiniteError as exc:
                raise DivergenceError(f"non-finite values at epoch {epoch}, batch {b}: {exc}") from None
            optimizer_step(opt, params, {n: grads[p] for n, p in params.items()}, lr=lr)
            total += loss.item()
        train_loss = total / max(n_batches, 1)
        dev_eer = compute_eer(score_dataset(model, dev_data))[0]
        entry = EpochLog(epoch, lr, train_loss, dev_eer)
        result.log.append(entry)
        if on_epoch is not None:
            on_epoch(entry)
        log.info("epoch %d lr %.3e loss %.5f dev_eer %.4f", epoch, lr, train_loss, dev_eer)
        candidates.append((dev_eer, epoch, to_checkpoint(model, epoch=epoch, dev_eer=f"{dev_eer:.6f}")))
        if cfg.selection == "best_dev":
            candidates = sorted(candidates, key=lambda c: (c[0], c[1]))[:cfg.top_k]
        if dev_eer < best_eer:
            best_eer, stale = dev_eer, 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                result.stopped_early = True
                break
    ranked = sorted(candidates, key=lambda c: (c[0], c[1]))
    if cfg.selection == "min_lr" and ranked:
        done = len(result.log)
        window = set()
        for e in schedule.min_lr_epochs(done):
            window.update({e - 1, e, e + 1})
        pool = [c for c in ranked if c[1] in window] or ranked
        result.best = pool[0][2]
    elif ranked:
        result.best = ranked[0][2]
    result.top = [c[2] for c in ranked[:cfg.top_k]]
    return result
