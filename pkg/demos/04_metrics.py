"""EER, minDCF and CLLR on hand-made score sets.

Scores are read as natural-log likelihood ratios (bona fide vs spoof).
"""
import numpy as np

from nes2net.evaluation import ScoreSet, Trial, compute_cllr, compute_eer, summarize

rng = np.random.default_rng(0)
trials = [Trial(f"b{i}", "bonafide", "-", float(rng.normal(2.0))) for i in range(300)]
for attack, shift in [("A01", -3.0), ("A02", 0.5)]:
    trials += [Trial(f"{attack}_{i}", "spoof", attack, float(rng.normal(shift))) for i in range(300)]
scores = ScoreSet(trials)

for name, value in summarize(scores).items():
    print(f"{name:15s} {value}")

# A system that always answers "no idea" costs one bit per trial.
flat = ([0.0] * 10, [0.0] * 30)
print("\nall-zero scores: EER", compute_eer(flat)[0], "CLLR", compute_cllr(flat))

# Any strictly increasing recalibration leaves the EER alone but not CLLR.
b, s = scores.bonafide, scores.spoof
print("EER raw vs 3x scaled:", compute_eer((b, s))[0], compute_eer((3 * b, 3 * s))[0])
print("CLLR raw vs 3x scaled:", round(compute_cllr((b, s)), 4), round(compute_cllr((3 * b, 3 * s)), 4))
