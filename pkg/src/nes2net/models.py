"""Nes2Net, Nes2Net-X and the Res2Net baselines over one declarative config."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from . import core
from .core import Parameter, Tensor, mac_scope
from .layers import AttStatsPool, BatchNorm1d, Conv1d, LayerAggregator, Linear, Module, SEBlock

VARIANTS = ("nes2net", "nes2net_x", "res2net_dr", "res2net_wodr")
NESTED = ("nes2net", "nes2net_x")
FUSIONS = ("linear", "softmax")

SPOOF, BONAFIDE = 0, 1


@dataclass(frozen=True)
class ModelConfig:
    """Back-end description.

    ``s1``/``s2`` are the outer and inner scales of the nested variants;
    ``blocks``/``scale`` configure the Res2Net baselines, which run at
    ``reduced_dim`` after a projection (``res2net_dr``) or directly at
    ``input_dim`` (``res2net_wodr``).  ``block_width`` is the hidden width
    inside a baseline block (0 keeps the working width).
    """

    variant: str = "nes2net"
    input_dim: int = 1024
    s1: int = 8
    s2: int = 8
    blocks: int = 4
    scale: int = 4
    reduced_dim: int = 128
    block_width: int = 0
    kernel: int = 3
    se_ratio: int = 8
    pool_bottleneck: int = 80
    pool_attention: str = "context"
    fusion: str = "linear"
    frontend_layers: int = 0
    num_classes: int = 2
    dtype: str = "f32"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        for name in ("input_dim", "s1", "s2", "blocks", "scale", "kernel", "se_ratio",
                     "pool_bottleneck", "num_classes"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.kernel % 2 == 0:
            raise ValueError("kernel must be odd")
        if self.frontend_layers < 0 or self.block_width < 0:
            raise ValueError("frontend_layers and block_width must be >= 0")
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}")
        if self.variant in NESTED:
            if self.s1 < 2:
                raise ValueError("s1 must be >= 2")
            if self.input_dim % self.s1:
                raise ValueError(f"s1={self.s1} does not divide input_dim={self.input_dim}")
            width = self.input_dim // self.s1
            if width % self.s2:
                raise ValueError(f"s2={self.s2} does not divide nested width {width}")
            if width % self.se_ratio:
                raise ValueError(f"se_ratio={self.se_ratio} does not divide nested width {width}")
        else:
            if self.variant == "res2net_dr" and self.reduced_dim < 1:
                raise ValueError("reduced_dim must be >= 1")
            if self.hidden_width % self.scale:
                raise ValueError(f"scale={self.scale} does not divide block width {self.hidden_width}")

    @property
    def working_width(self) -> int:
        return self.reduced_dim if self.variant == "res2net_dr" else self.input_dim

    @property
    def hidden_width(self) -> int:
        return self.block_width or self.working_width

    @property
    def nested_width(self) -> int:
        return self.input_dim // self.s1

    def replace(self, **changes) -> "ModelConfig":
        return dataclasses.replace(self, **changes)


CANONICAL = {
    "nes2net": ModelConfig(variant="nes2net"),
    "nes2net_x": ModelConfig(variant="nes2net_x"),
    "res2net_dr": ModelConfig(variant="res2net_dr", blocks=4, scale=4, reduced_dim=128,
                              block_width=192),
    "res2net_wodr": ModelConfig(variant="res2net_wodr", blocks=1, scale=64),
}


def canonical_config(variant: str, **overrides) -> ModelConfig:
    """Reference-size config (N=1024) used for cost profiling."""
    return CANONICAL[variant].replace(**overrides)


def reduced_config(variant: str, **overrides) -> ModelConfig:
    """Small config for finite-difference checks (N=64, s1=s2=4)."""
    base = dict(variant=variant, input_dim=64, s1=4, s2=4, blocks=2, scale=4, reduced_dim=16,
                se_ratio=4, pool_bottleneck=8, dtype="f64")
    if variant == "res2net_wodr":
        base.update(blocks=1, scale=8, block_width=16)
    base.update(overrides)
    return ModelConfig(**base)


# ---------------------------------------------------------------------------
# building blocks

class GroupTransform(Module):
    """``M_j``: k-tap conv, batch norm, ReLU.  Optionally fuses two inputs first."""

    def __init__(self, width: int, kernel: int, rng, dtype, fusion: str | None = None):
        self.conv = Conv1d(width, width, kernel, rng, dtype=dtype)
        self.bn = BatchNorm1d(width, dtype=dtype)
        self.fusion = fusion
        if fusion is not None:
            init = np.ones(2) if fusion == "linear" else np.zeros(2)
            self.fusion_weight = Parameter(init, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        return core.relu(self.bn(self.conv(x)))

    __call__ = forward

    def fusion_weights(self) -> Tensor:
        if self.fusion == "softmax":
            return core.softmax(self.fusion_weight, axis=0)
        return self.fusion_weight

    def fused(self, current: Tensor, previous: Tensor) -> Tensor:
        """Stack (current, previous), convolve each slice, then weight-sum the results."""
        b, c, t = current.shape
        stacked = core.reshape(core.stack([current, previous], axis=0), (2 * b, c, t))
        z = core.conv1d(stacked, self.conv.weight, None, pad=self.conv.pad,
                        dilation=self.conv.dilation)
        z = core.reshape(z, (2, b, c, t))
        fused = core.weighted_sum(z, self.fusion_weights(), axis=0)
        fused = core.add(fused, core.reshape(self.conv.bias, (c, 1)))
        return core.relu(self.bn(fused))


class NestedLayer(Module):
    """Inner Res2Net-style layer ``K_i`` applied to one outer subset.

    1x1 conv + BN + ReLU, split into ``s2`` groups with the hierarchical
    accumulate chain, SE recalibration, and a residual from the layer input.
    With ``fusion`` set, the addition inside the chain becomes a learnable
    weighted sum (the Nes2Net-X layer).
    """

    def __init__(self, width: int, s2: int, kernel: int, se_ratio: int, rng, dtype,
                 fusion: str | None = None):
        self.width, self.s2 = width, s2
        self.conv_in = Conv1d(width, width, 1, rng, dtype=dtype)
        self.bn_in = BatchNorm1d(width, dtype=dtype)
        g = width // s2
        self.groups = [GroupTransform(g, kernel, rng, dtype, fusion) for _ in range(s2 - 1)]
        self.se = SEBlock(width, se_ratio, rng, dtype)

    @property
    def fused(self) -> bool:
        return bool(self.groups) and self.groups[0].fusion is not None

    def forward(self, x: Tensor) -> Tensor:
        x3 = core.reshape(x, (1,) + x.shape) if x.ndim == 2 else x
        if x3.shape[1] != self.width:
            raise ValueError(f"nested layer expects {self.width} channels, got {x.shape}")
        h = core.relu(self.bn_in(self.conv_in(x3)))
        parts = core.split_channels(h, self.s2, axis=1)
        outs = [parts[0]]
        prev = parts[0]
        for part, m in zip(parts[1:], self.groups):
            prev = m.fused(part, prev) if m.fusion else m(core.add(part, prev))
            outs.append(prev)
        y = self.se(core.concat_channels(outs, axis=1))
        y = core.add(y, x3)
        return core.reshape(y, x.shape) if x.ndim == 2 else y

    __call__ = forward


class NestedTrunk(Module):
    """Outer split/accumulate layer: ``y_1 = x_1``, ``y_2 = K_2(x_2)``,
    ``y_i = K_i(x_i + y_{i-1})``, concatenated back to ``N`` channels."""

    def __init__(self, cfg: ModelConfig, rng):
        fusion = cfg.fusion if cfg.variant == "nes2net_x" else None
        self.s1 = cfg.s1
        self.nested = [NestedLayer(cfg.nested_width, cfg.s2, cfg.kernel, cfg.se_ratio, rng,
                                   cfg.dtype, fusion) for _ in range(cfg.s1 - 1)]

    def forward(self, x: Tensor, prefix: str = "trunk") -> Tensor:
        parts = core.split_channels(x, self.s1, axis=1)
        outs = [parts[0]]
        prev = None
        for i, (part, layer) in enumerate(zip(parts[1:], self.nested)):
            with mac_scope(f"{prefix}.nested.{i}"):
                prev = layer(part if prev is None else core.add(part, prev))
            outs.append(prev)
        return core.concat_channels(outs, axis=1)

    __call__ = forward


class Res2NetBlock(Module):
    """Standard 1-d Res2Net bottleneck: 1x1 in, scaled k-tap groups, 1x1 out, residual."""

    def __init__(self, width: int, hidden: int, scale: int, kernel: int, rng, dtype):
        self.scale = scale
        self.conv_in = Conv1d(width, hidden, 1, rng, dtype=dtype)
        self.bn_in = BatchNorm1d(hidden, dtype=dtype)
        g = hidden // scale
        self.groups = [GroupTransform(g, kernel, rng, dtype) for _ in range(scale - 1)]
        self.conv_out = Conv1d(hidden, width, 1, rng, dtype=dtype)
        self.bn_out = BatchNorm1d(width, dtype=dtype)

    def forward(self, x: Tensor) -> Tensor:
        h = core.relu(self.bn_in(self.conv_in(x)))
        parts = core.split_channels(h, self.scale, axis=1)
        outs = [parts[0]]
        prev = None
        for part, m in zip(parts[1:], self.groups):
            prev = m(part if prev is None else core.add(part, prev))
            outs.append(prev)
        y = self.bn_out(self.conv_out(core.concat_channels(outs, axis=1)))
        return core.relu(core.add(y, x))

    __call__ = forward


# ---------------------------------------------------------------------------
# whole model

class Model(Module):
    """Back-end: [layer weighting] -> [DR] -> trunk -> attentive pooling -> linear head."""

    def __init__(self, cfg: ModelConfig, rng: np.random.Generator):
        self.config = cfg
        dt = cfg.dtype
        if cfg.frontend_layers:
            self.frontend = LayerAggregator(cfg.frontend_layers, dtype=dt)
        if cfg.variant == "res2net_dr":
            self.dr = Linear(cfg.input_dim, cfg.reduced_dim, rng, dt)
        if cfg.variant in NESTED:
            self.trunk = NestedTrunk(cfg, rng)
        else:
            self.blocks = [Res2NetBlock(cfg.working_width, cfg.hidden_width, cfg.scale,
                                        cfg.kernel, rng, dt) for _ in range(cfg.blocks)]
        self.pool = AttStatsPool(cfg.working_width, cfg.pool_bottleneck, rng,
                                 mode=cfg.pool_attention, dtype=dt)
        self.head = Linear(2 * cfg.working_width, cfg.num_classes, rng, dt)

    # -- forward ----------------------------------------------------------
    def _prepare(self, x) -> tuple[Tensor, bool]:
        x = core.as_tensor(x)
        if x.dtype != core._dtype_of(self.config.dtype):
            x = Tensor(x.data, dtype=self.config.dtype)
        frame_rank = 3 if self.config.frontend_layers else 2
        if x.ndim == frame_rank:
            return core.reshape(x, (1,) + x.shape), True
        if x.ndim != frame_rank + 1:
            raise ValueError(f"unexpected input shape {x.shape}")
        return x, False

    def features(self, x: Tensor) -> Tensor:
        """Batched input ``[B, (L,) N, T]`` -> working-width frames ``[B, C, T]``."""
        cfg = self.config
        if cfg.frontend_layers:
            with mac_scope("frontend"):
                x = self.frontend(x)
        if x.shape[1] != cfg.input_dim:
            raise ValueError(f"expected {cfg.input_dim} input channels, got {x.shape}")
        if cfg.variant == "res2net_dr":
            with mac_scope("dr"):
                x = self.dr(x)
        return x

    def trunk_forward(self, x) -> Tensor:
        """Frame-level trunk output, same batching as the input."""
        x, unb = self._prepare(x)
        h = self.features(x)
        if self.config.variant in NESTED:
            h = self.trunk(h)
        else:
            for i, block in enumerate(self.blocks):
                with mac_scope(f"blocks.{i}"):
                    h = block(h)
        return core.reshape(h, h.shape[1:]) if unb else h

    def forward(self, x) -> Tensor:
        """Unnormalized class logits, ``[num_classes]`` or ``[B, num_classes]``."""
        x, unb = self._prepare(x)
        h = self.trunk_forward(x)
        with mac_scope("pool"):
            pooled = self.pool(h)
        with mac_scope("head"):
            logits = self.head.vectors(pooled)
        return core.reshape(logits, (logits.shape[1],)) if unb else logits

    __call__ = forward

    def score(self, x) -> np.ndarray:
        """Bona fide score: logit(bonafide) - logit(spoof), no tape."""
        with core.no_recording():
            logits = self.forward(x).data
        return (logits[..., BONAFIDE] - logits[..., SPOOF]).astype(np.float64)

    # -- state ------------------------------------------------------------
    def state(self) -> dict[str, np.ndarray]:
        """Parameters then buffers, in deterministic order."""
        out = {name: p.data for name, p in self.named_parameters()}
        out.update(self.named_buffers())
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(params) | set(buffers)
        if set(state) != expected:
            missing = sorted(expected - set(state))
            extra = sorted(set(state) - expected)
            raise ValueError(f"state mismatch: missing {missing[:5]}, unexpected {extra[:5]}")
        for name, p in params.items():
            arr = np.asarray(state[name])
            if arr.shape != p.shape or arr.dtype != p.dtype:
                raise ValueError(f"{name}: expected {p.dtype}{p.shape}, got {arr.dtype}{arr.shape}")
            p.assign(arr)
        for name, buf in buffers.items():
            arr = np.asarray(state[name])
            if arr.shape != buf.shape or arr.dtype != buf.dtype:
                raise ValueError(f"{name}: expected {buf.dtype}{buf.shape}, got {arr.dtype}{arr.shape}")
            owner, attr = self._resolve(name)
            setattr(owner, attr, arr.copy())

    def _resolve(self, dotted: str):
        parts = dotted.split(".")
        obj = self
        i = 0
        while i < len(parts) - 1:
            key = parts[i]
            val = getattr(obj, key)
            if isinstance(val, list):
                i += 1
                val = val[int(parts[i])]
            obj = val
            i += 1
        return obj, parts[-1]


def build_model(cfg: ModelConfig, seed: int = 0) -> Model:
    """Deterministically initialised model (He-uniform weights, zero biases)."""
    cfg.validate()
    return Model(cfg, np.random.default_rng(seed))
