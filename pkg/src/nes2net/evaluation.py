"""Detection metrics over score sets and the plain-text score file.

Scores follow the convention *higher = more bona fide*.  A trial is
accepted at threshold ``theta`` when ``score >= theta``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

KEYS = ("bonafide", "spoof")


class ScoreFileError(ValueError):
    pass


@dataclass(frozen=True)
class Trial:
    utt_id: str
    key: str
    attack: str
    score: float


@dataclass
class ScoreSet:
    trials: list[Trial] = field(default_factory=list)

    def __post_init__(self):
        seen = set()
        for t in self.trials:
            if t.key not in KEYS:
                raise ValueError(f"{t.utt_id}: key must be one of {KEYS}, got {t.key!r}")
            if not math.isfinite(t.score):
                raise ValueError(f"{t.utt_id}: non-finite score")
            if t.utt_id in seen:
                raise ValueError(f"duplicate utt_id {t.utt_id!r}")
            seen.add(t.utt_id)

    @classmethod
    def from_arrays(cls, utt_ids, keys, attacks, scores) -> "ScoreSet":
        return cls([Trial(u, k, a, float(s)) for u, k, a, s in zip(utt_ids, keys, attacks, scores)])

    def __len__(self) -> int:
        return len(self.trials)

    @property
    def bonafide(self) -> np.ndarray:
        return np.array([t.score for t in self.trials if t.key == "bonafide"], dtype=np.float64)

    @property
    def spoof(self) -> np.ndarray:
        return np.array([t.score for t in self.trials if t.key == "spoof"], dtype=np.float64)

    @property
    def attacks(self) -> list[str]:
        return sorted({t.attack for t in self.trials if t.key == "spoof"})

    def subset(self, attack: str) -> "ScoreSet":
        return ScoreSet([t for t in self.trials if t.key == "bonafide" or t.attack == attack])


def _classes(s) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(s, ScoreSet):
        bona, spoof = s.bonafide, s.spoof
    else:
        bona, spoof = (np.asarray(a, dtype=np.float64).ravel() for a in s)
    if bona.size == 0 or spoof.size == 0:
        raise ValueError("both bona fide and spoof trials are required")
    return bona, spoof


def operating_points(bona: np.ndarray, spoof: np.ndarray):
    """Miss (FRR) and false-alarm (FAR) rates at every distinct threshold.

    Thresholds are the lowest score (accept all), the midpoints between
    adjacent distinct scores, and just above the highest score (reject all).
    """
    scores = np.concatenate([bona, spoof])
    uniq = np.unique(scores)
    thresholds = np.concatenate([uniq[:1], (uniq[:-1] + uniq[1:]) / 2,
                                 [np.nextafter(uniq[-1], np.inf)]])
    bs, ss = np.sort(bona), np.sort(spoof)
    frr = np.searchsorted(bs, thresholds, side="left") / bs.size
    far = 1.0 - np.searchsorted(ss, thresholds, side="left") / ss.size
    return frr, far, thresholds


def interpolate_crossing(frr: np.ndarray, far: np.ndarray, thresholds: np.ndarray):
    """EER where the piecewise-linear (FRR, FAR) path crosses FRR = FAR."""
    diff = frr - far                      # non-decreasing from -1 to +1
    exact = np.flatnonzero(diff == 0)
    if exact.size:
        i = exact[0]
        return float(frr[i]), float(thresholds[i])
    j = int(np.flatnonzero(diff > 0)[0])
    i = j - 1
    t = diff[i] / (diff[i] - diff[j])
    eer = frr[i] + t * (frr[j] - frr[i])
    thr = thresholds[i] if abs(diff[i]) <= abs(diff[j]) else thresholds[j]
    return float(eer), float(thr)


def compute_eer(s) -> tuple[float, float]:
    """Equal error rate (fraction) and the threshold nearest the crossing.

    ``s`` is a :class:`ScoreSet` or a ``(bonafide_scores, spoof_scores)`` pair.
    """
    bona, spoof = _classes(s)
    return interpolate_crossing(*operating_points(bona, spoof))


def _workers() -> int:
    env = os.environ.get("N2N_THREADS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def per_attack_eer(s: ScoreSet) -> tuple[dict[str, float], float]:
    """EER of every attack against all bona fide trials, plus the pooled EER."""
    attacks = s.attacks
    if not attacks:
        raise ValueError("no spoof trials")
    with ThreadPoolExecutor(max_workers=_workers()) as pool:
        values = list(pool.map(lambda a: compute_eer(s.subset(a))[0], attacks))
    return dict(zip(attacks, values)), compute_eer(s)[0]


def compute_min_dcf(s, p_target: float = 0.05, c_miss: float = 1.0, c_fa: float = 10.0) -> float:
    """Normalized minimum detection cost over all thresholds (no ROC convex hull)."""
    if not 0 < p_target < 1 or c_miss <= 0 or c_fa <= 0:
        raise ValueError("need 0 < p_target < 1 and positive costs")
    bona, spoof = _classes(s)
    frr, far, _ = operating_points(bona, spoof)
    cost = p_target * c_miss * frr + (1 - p_target) * c_fa * far
    return float(cost.min() / min(p_target * c_miss, (1 - p_target) * c_fa))


def compute_cllr(s) -> float:
    """Cost of log-likelihood ratio in bits, scores read as natural-log LLRs."""
    bona, spoof = _classes(s)
    # convert to bits per trial first so zero scores cost exactly one bit
    miss = (np.logaddexp(0.0, -bona) / math.log(2)).mean()
    fa = (np.logaddexp(0.0, spoof) / math.log(2)).mean()
    return float((miss + fa) / 2)


def summarize(s: ScoreSet, p_target: float = 0.05, c_miss: float = 1.0,
              c_fa: float = 10.0) -> dict:
    per_attack, pooled = per_attack_eer(s)
    return {
        "eer": pooled,
        "per_attack_eer": per_attack,
        "min_dcf": compute_min_dcf(s, p_target, c_miss, c_fa),
        "cllr": compute_cllr(s),
        "n_bonafide": int(s.bonafide.size),
        "n_spoof": int(s.spoof.size),
    }


# ---------------------------------------------------------------------------
# score files: "utt_id attack_tag key score" per line, '#' comments

def format_score(x: float) -> str:
    """Shortest decimal that reads back to the same double."""
    return repr(float(x))


def write_scores(s: ScoreSet, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in s.trials:
            fh.write(f"{t.utt_id} {t.attack} {t.key} {format_score(t.score)}\n")


def parse_scores(text: str, source: str = "<string>") -> ScoreSet:
    trials = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.rstrip("\r")
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 4:
            raise ScoreFileError(f"{source}:{lineno}: expected 4 fields, got {len(fields)}")
        utt, attack, key, score = fields
        if key not in KEYS:
            raise ScoreFileError(f"{source}:{lineno}: key must be bonafide or spoof, got {key!r}")
        try:
            value = float(score)
        except ValueError:
            raise ScoreFileError(f"{source}:{lineno}: bad score {score!r}") from None
        if not math.isfinite(value):
            raise ScoreFileError(f"{source}:{lineno}: non-finite score")
        if utt in seen:
            raise ScoreFileError(f"{source}:{lineno}: duplicate utt_id {utt!r}")
        seen.add(utt)
        trials.append(Trial(utt, key, attack, value))
    return ScoreSet(trials)


def read_scores(path) -> ScoreSet:
    data = Path(path).read_bytes().decode("utf-8")
    return parse_scores(data, str(path))
