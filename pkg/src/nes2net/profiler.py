"""Parameter and multiply-accumulate accounting.

Counts are derived analytically from the :class:`ModelConfig` alone and can
be checked against (a) the parameters the built model actually holds and
(b) a forward pass with the MAC counter switched on.

Convention: one MAC per weight application.  Bias adds, activations,
normalization and softmax are free.  Frame-wise layers scale with ``T``;
SE gates, the pooling context branch and the classifier run once per
utterance.
"""
from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import core
from .models import NESTED, Model, ModelConfig


@dataclass(frozen=True)
class CostRow:
    layer: str
    params: int
    macs: int


@dataclass
class CostReport:
    rows: list[CostRow]
    frames: int
    variant: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_macs(self) -> int:
        return sum(r.macs for r in self.rows)

    @property
    def mmacs(self) -> float:
        return self.total_macs / 1e6

    def row(self, name: str) -> CostRow:
        for r in self.rows:
            if r.layer == name:
                return r
        raise KeyError(name)

    @property
    def dr_params_share(self) -> float:
        dr = sum(r.params for r in self.rows if r.layer == "dr")
        return dr / self.total_params if self.total_params else 0.0

    @property
    def dr_macs_share(self) -> float:
        dr = sum(r.macs for r in self.rows if r.layer == "dr")
        return dr / self.total_macs if self.total_macs else 0.0

    def to_tsv(self) -> str:
        lines = [f"{r.layer}\t{r.params}\t{r.macs}" for r in self.rows]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        width = max([len(r.layer) for r in self.rows] + [5])
        buf = io.StringIO()
        buf.write(f"{'layer':<{width}}  {'params':>12}  {'MACs':>14}  {'MMACs':>9}\n")
        buf.write("-" * (width + 43) + "\n")
        for r in self.rows:
            buf.write(f"{r.layer:<{width}}  {r.params:>12,}  {r.macs:>14,}  {r.macs / 1e6:>9.4f}\n")
        buf.write("-" * (width + 43) + "\n")
        buf.write(f"{'total':<{width}}  {self.total_params:>12,}  {self.total_macs:>14,}  "
                  f"{self.mmacs:>9.4f}\n")
        buf.write(f"frames={self.frames}  dr_params_share={self.dr_params_share:.4f}  "
                  f"dr_macs_share={self.dr_macs_share:.4f}\n")
        return buf.getvalue()


def parse_tsv(text: str) -> list[CostRow]:
    rows = []
    for line in text.splitlines():
        if not line.strip():
            continue
        name, params, macs = line.split("\t")
        rows.append(CostRow(name, int(params), int(macs)))
    return rows


# ---------------------------------------------------------------------------
# analytic formulas (params, macs per frame, macs per utterance)

def linear_cost(n_in: int, n_out: int) -> tuple[int, int]:
    return n_in * n_out + n_out, n_in * n_out


def conv_cost(c_in: int, c_out: int, k: int, bias: bool = True) -> tuple[int, int]:
    return c_out * c_in * k + (c_out if bias else 0), c_out * c_in * k


def bn_params(c: int) -> int:
    return 2 * c


def se_cost(c: int, r: int) -> tuple[int, int]:
    hid = c // r
    return c * hid + hid + hid * c + c, 2 * c * hid


def nested_layer_cost(width: int, s2: int, k: int, r: int, fused: bool):
    g = width // s2
    p_in, m_in = conv_cost(width, width, 1)
    p_g, m_g = conv_cost(g, g, k)
    n_groups = s2 - 1
    params = p_in + bn_params(width) + n_groups * (p_g + bn_params(g))
    per_frame = m_in + n_groups * m_g
    if fused:
        params += n_groups * 2
        per_frame += n_groups * (m_g + 2 * g)   # second conv slice + two weights per element
    se_p, se_m = se_cost(width, r)
    return params + se_p, per_frame, se_m


def res2net_block_cost(width: int, hidden: int, scale: int, k: int):
    g = hidden // scale
    p_in, m_in = conv_cost(width, hidden, 1)
    p_g, m_g = conv_cost(g, g, k)
    p_out, m_out = conv_cost(hidden, width, 1)
    params = (p_in + bn_params(hidden) + (scale - 1) * (p_g + bn_params(g))
              + p_out + bn_params(width))
    return params, m_in + (scale - 1) * m_g + m_out, 0


def pool_cost(c: int, b: int, mode: str):
    p1, m1 = linear_cost(c, b)
    c_out = 1 if mode == "shared" else c
    p2, m2 = linear_cost(b, c_out)
    params, per_frame, per_utt = p1 + p2, m1 + m2, 0
    if mode == "context":
        params += 2 * c * b
        per_utt += 2 * c * b
    return params, per_frame, per_utt


def analytic_rows(cfg: ModelConfig, frames: int) -> list[CostRow]:
    if frames < 1:
        raise ValueError("frames must be >= 1")
    rows = []
    if cfg.frontend_layers:
        rows.append(CostRow("frontend", cfg.frontend_layers,
                            cfg.frontend_layers * cfg.input_dim * frames))
    if cfg.variant == "res2net_dr":
        p, m = linear_cost(cfg.input_dim, cfg.reduced_dim)
        rows.append(CostRow("dr", p, m * frames))
    if cfg.variant in NESTED:
        for i in range(cfg.s1 - 1):
            p, mf, mu = nested_layer_cost(cfg.nested_width, cfg.s2, cfg.kernel, cfg.se_ratio,
                                          cfg.variant == "nes2net_x")
            rows.append(CostRow(f"trunk.nested.{i}", p, mf * frames + mu))
    else:
        for i in range(cfg.blocks):
            p, mf, mu = res2net_block_cost(cfg.working_width, cfg.hidden_width, cfg.scale,
                                           cfg.kernel)
            rows.append(CostRow(f"blocks.{i}", p, mf * frames + mu))
    p, mf, mu = pool_cost(cfg.working_width, cfg.pool_bottleneck, cfg.pool_attention)
    rows.append(CostRow("pool", p, mf * frames + mu))
    p, m = linear_cost(2 * cfg.working_width, cfg.num_classes)
    rows.append(CostRow("head", p, m))
    return rows


# ---------------------------------------------------------------------------
# model-level entry points

def _row_of(param_name: str, names: list[str]) -> str:
    best = ""
    for n in names:
        if (param_name == n or param_name.startswith(n + ".")) and len(n) > len(best):
            best = n
    if not best:
        raise KeyError(f"parameter {param_name!r} belongs to no cost row")
    return best


def count_params(model: Model) -> list[CostRow]:
    """Per-row trainable parameter counts enumerated from the model itself."""
    names = [r.layer for r in analytic_rows(model.config, 1)]
    totals = dict.fromkeys(names, 0)
    for pname, p in model.named_parameters():
        totals[_row_of(pname, names)] += p.size
    return [CostRow(n, totals[n], 0) for n in names]


def buffer_count(model: Model) -> int:
    """Non-trainable running statistics, reported apart from the parameter total."""
    return sum(b.size for _, b in model.named_buffers())


def count_macs(model: Model, frames: int) -> list[CostRow]:
    rows = analytic_rows(model.config, frames)
    return [CostRow(r.layer, 0, r.macs) for r in rows]


def instrumented_macs(model: Model, frames: int, seed: int = 0) -> dict[str, int]:
    """Run one forward on random input and return counted MACs per row."""
    if frames < 1:
        raise ValueError("frames must be >= 1")
    cfg = model.config
    shape = ((cfg.frontend_layers,) if cfg.frontend_layers else ()) + (cfg.input_dim, frames)
    x = np.random.default_rng(seed).standard_normal(shape)
    was_training = model.training
    model.eval()
    try:
        with core.no_recording(), core.count_macs() as counter:
            model(x)
    finally:
        model.train(was_training)
    return dict(counter.by_scope)


def profile(model: Model, frames: int = 200) -> CostReport:
    cfg = model.config
    rows = analytic_rows(cfg, frames)
    return CostReport(rows, frames, cfg.variant, {"buffers": buffer_count(model)})


def verify_counts(model: Model, frames: int = 200) -> dict[str, int]:
    """|analytic - observed| per row for both params and MACs; all zeros when consistent."""
    analytic = analytic_rows(model.config, frames)
    enumerated = {r.layer: r.params for r in count_params(model)}
    counted = instrumented_macs(model, frames)
    out = {}
    for r in analytic:
        out[f"{r.layer}:params"] = abs(r.params - enumerated.get(r.layer, 0))
        out[f"{r.layer}:macs"] = abs(r.macs - counted.get(r.layer, 0))
    stray = sum(v for k, v in counted.items() if k not in {r.layer for r in analytic})
    out["unattributed:macs"] = stray
    return out
