"""Losses, optimizer, schedule, synthetic data, checkpoints and the training loop."""
from .checkpoint import Checkpoint, CheckpointError, average_checkpoints
from .data import Dataset, SyntheticDataConfig, crop_or_pad, synth_generate
from .losses import FocalLossConfig, focal_loss, weighted_ce
from .optim import OptimizerState, optimizer_step
from .schedule import CosineCycleSchedule, lr_at
from .trainer import (DivergenceError, EpochLog, TrainConfig, TrainResult, score_dataset,
                      to_checkpoint, train)

__all__ = [
    "Checkpoint", "CheckpointError", "average_checkpoints",
    "Dataset", "SyntheticDataConfig", "crop_or_pad", "synth_generate",
    "FocalLossConfig", "focal_loss", "weighted_ce",
    "OptimizerState", "optimizer_step",
    "CosineCycleSchedule", "lr_at",
    "DivergenceError", "EpochLog", "TrainConfig", "TrainResult", "score_dataset",
    "to_checkpoint", "train",
]
