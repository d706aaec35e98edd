"""Train Nes2Net on a synthetic task, score it, and average checkpoints.

Bona fide trials carry a small mean shift along a fixed direction, so a
working model should drive the eval EER close to zero within a few epochs.
Takes about half a minute on one core.
"""
from pathlib import Path

import numpy as np

from nes2net.config import load_config
from nes2net.evaluation import summarize
from nes2net.models import build_model
from nes2net.seeding import int_seed
from nes2net.training import average_checkpoints, score_dataset, synth_generate, train

SEED = 0
cfg = load_config(Path(__file__).resolve().parents[1] / "configs" / "toy_easy.cfg")
data = cfg.data_for(int_seed(SEED, "data"))
splits = {name: synth_generate(data, name, np.float32) for name in ("train", "dev", "eval")}

model = build_model(cfg.model, seed=int_seed(SEED, "model.init"))
result = train(model, splits["train"], splits["dev"], cfg.train, seed=int_seed(SEED, "train"))
print("epoch\tlr\ttrain_loss\tdev_eer")
print(result.log_text(), end="")

for label, ckpt in [("best", result.best), ("top-3 average", average_checkpoints(result.top))]:
    model.load_state(ckpt.entries)
    metrics = summarize(score_dataset(model, splits["eval"]))
    print(f"{label:14s} eval EER {metrics['eer']:.2%}  minDCF {metrics['min_dcf']:.4f}  "
          f"CLLR {metrics['cllr']:.3f}")
