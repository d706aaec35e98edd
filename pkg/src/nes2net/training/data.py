"""Synthetic stand-in for foundation-model features.

Each frame is drawn as ``N(+delta/2 * u, sigma^2 I)`` for bona fide and
``N(-delta/2 * u, sigma^2 I)`` for spoof, with ``u`` a unit direction fixed
by the seed and shared across splits.  Utterances get random natural
lengths and are cropped or tile-padded to ``frames``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..models import BONAFIDE, SPOOF
from ..seeding import rng_for

SPLITS = ("train", "dev", "eval")


@dataclass(frozen=True)
class SyntheticDataConfig:
    dim: int = 64
    frames: int = 200
    delta: float = 2.0
    noise_scale: float = 1.0
    n_train: int = 2000
    n_dev: int = 500
    n_eval: int = 500
    n_attacks: int = 3
    bonafide_fraction: float = 0.5
    layers: int = 0
    seed: int = 0

    def __post_init__(self):
        if self.delta < 0 or self.noise_scale <= 0:
            raise ValueError("delta must be >= 0 and noise_scale > 0")
        if self.dim < 1 or self.frames < 1:
            raise ValueError("dim and frames must be positive")
        if self.n_attacks < 1 or not 0 < self.bonafide_fraction < 1:
            raise ValueError("need >= 1 attack and bonafide_fraction in (0, 1)")

    def size(self, split: str) -> int:
        return {"train": self.n_train, "dev": self.n_dev, "eval": self.n_eval}[split]


@dataclass
class Dataset:
    """Features ``[n, (L,) dim, frames]`` with labels and trial metadata."""

    features: np.ndarray
    labels: np.ndarray
    utt_ids: list[str]
    attacks: list[str]

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def keys(self) -> list[str]:
        return ["bonafide" if y == BONAFIDE else "spoof" for y in self.labels]


def crop_or_pad(x: np.ndarray, frames: int, rng: np.random.Generator | None = None) -> np.ndarray:
    """Fix the trailing (time) axis to ``frames``.

    Longer inputs are cropped at a random offset (offset 0 without ``rng``);
    shorter ones are repeated end-to-end.
    """
    t = x.shape[-1]
    if t >= frames:
        start = int(rng.integers(0, t - frames + 1)) if rng is not None else 0
        return x[..., start:start + frames]
    reps = -(-frames // t)
    return np.tile(x, (1,) * (x.ndim - 1) + (reps,))[..., :frames]


def direction(cfg: SyntheticDataConfig) -> np.ndarray:
    u = rng_for(cfg.seed, "data.direction").standard_normal(cfg.dim)
    return u / np.linalg.norm(u)


def synth_generate(cfg: SyntheticDataConfig, split: str, dtype=np.float32) -> Dataset:
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}")
    n = cfg.size(split)
    rng = rng_for(cfg.seed, f"data.{split}")
    u = direction(cfg)
    n_bona = int(round(n * cfg.bonafide_fraction))
    labels = np.array([BONAFIDE] * n_bona + [SPOOF] * (n - n_bona))
    labels = labels[rng.permutation(n)]
    lead = (cfg.layers,) if cfg.layers else ()
    feats = np.empty((n,) + lead + (cfg.dim, cfg.frames), dtype=dtype)
    attacks = []
    attack_no = 0
    for i, y in enumerate(labels):
        length = int(rng.integers(cfg.frames // 2 + 1, 3 * cfg.frames // 2 + 1))
        sign = 0.5 if y == BONAFIDE else -0.5
        x = cfg.noise_scale * rng.standard_normal(lead + (cfg.dim, length))
        shift = sign * cfg.delta * u[:, None]
        if cfg.layers:
            x[cfg.layers - 1] += shift      # the class cue lives in the last layer
        else:
            x += shift
        feats[i] = crop_or_pad(x, cfg.frames, rng if split == "train" else None)
        if y == BONAFIDE:
            attacks.append("-")
        else:
            attacks.append(f"A{attack_no % cfg.n_attacks + 1:02d}")
            attack_no += 1
    ids = [f"{split}_{i:06d}" for i in range(n)]
    return Dataset(feats, labels, ids, attacks)
