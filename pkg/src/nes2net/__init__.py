"""Nested Res2Net back-ends for speech anti-spoofing, on a small numpy autodiff core.

Typical use::

    from nes2net import build_model, canonical_config, profile
    model = build_model(canonical_config("nes2net"), seed=0)
    print(profile(model, frames=200).to_table())
"""
from .core import Parameter, Tensor, backward, grad_check, recording
from .evaluation import (ScoreSet, compute_cllr, compute_eer, compute_min_dcf, per_attack_eer,
                         read_scores, write_scores)
from .models import VARIANTS, Model, ModelConfig, build_model, canonical_config, reduced_config
from .profiler import CostReport, analytic_rows, profile, verify_counts

__version__ = "0.1.0"

__all__ = [
    "Parameter", "Tensor", "backward", "grad_check", "recording",
    "ScoreSet", "compute_cllr", "compute_eer", "compute_min_dcf", "per_attack_eer",
    "read_scores", "write_scores",
    "VARIANTS", "Model", "ModelConfig", "build_model", "canonical_config", "reduced_config",
    "CostReport", "analytic_rows", "profile", "verify_counts",
]
