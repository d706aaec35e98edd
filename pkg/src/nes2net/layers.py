"""Parameterized layers: linear, conv, batch norm, SE, attentive pooling, layer weighting.

Frame-level tensors are laid out ``[batch, channels, frames]``; the
single-utterance form ``[channels, frames]`` is accepted everywhere and
returned unbatched.
"""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import core
from .core import Parameter, Tensor, mac_scope


class Module:
    """Minimal container with dotted-name parameter discovery."""

    training = True

    def children(self) -> Iterator[tuple[str, "Module"]]:
        for key, val in vars(self).items():
            if isinstance(val, Module):
                yield key, val
            elif isinstance(val, (list, tuple)):
                for i, item in enumerate(val):
                    if isinstance(item, Module):
                        yield f"{key}.{i}", item

    def own_parameters(self) -> Iterator[tuple[str, Parameter]]:
        for key, val in vars(self).items():
            if isinstance(val, Parameter):
                yield key, val

    def own_buffers(self) -> Iterator[tuple[str, np.ndarray]]:
        return iter(())

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Parameter]]:
        for key, p in self.own_parameters():
            yield prefix + key, p
        for key, child in self.children():
            yield from child.named_parameters(f"{prefix}{key}.")

    def named_buffers(self, prefix: str = "") -> Iterator[tuple[str, np.ndarray]]:
        for key, b in self.own_buffers():
            yield prefix + key, b
        for key, child in self.children():
            yield from child.named_buffers(f"{prefix}{key}.")

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def train(self, mode: bool = True) -> "Module":
        self.training = mode
        for _, child in self.children():
            child.train(mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)


def he_uniform(rng: np.random.Generator, shape, fan_in: int, dtype) -> np.ndarray:
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(dtype)


def _batched(x: Tensor) -> tuple[Tensor, bool]:
    if x.ndim == 2:
        return core.reshape(x, (1,) + x.shape), True
    if x.ndim != 3:
        raise ValueError(f"expected [C, T] or [B, C, T], got {x.shape}")
    return x, False


def _unbatch(y: Tensor, was_unbatched: bool) -> Tensor:
    return core.reshape(y, y.shape[1:]) if was_unbatched else y


class Linear(Module):
    """Fully connected map ``y = W x + b``.

    ``forward`` applies the weights to every frame of ``[in, T]`` or
    ``[B, in, T]``; ``vectors`` handles utterance-level ``[in]`` / ``[B, in]``.
    """

    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype="f32",
                 fan_in: int | None = None):
        if in_dim < 1 or out_dim < 1:
            raise ValueError("Linear dims must be positive")
        dt = core._dtype_of(dtype)
        self.in_dim, self.out_dim = in_dim, out_dim
        self.weight = Parameter(he_uniform(rng, (out_dim, in_dim), fan_in or in_dim, dt))
        self.bias = Parameter(np.zeros(out_dim, dtype=dt))

    def forward(self, x: Tensor) -> Tensor:
        if x.ndim not in (2, 3) or x.shape[-2] != self.in_dim:
            raise ValueError(f"Linear expects [{self.in_dim}, T] frames, got {x.shape}")
        y = core.matmul(self.weight, x)
        return core.add(y, core.reshape(self.bias, (self.out_dim, 1)))

    __call__ = forward

    def vectors(self, x: Tensor) -> Tensor:
        if x.ndim not in (1, 2) or x.shape[-1] != self.in_dim:
            raise ValueError(f"Linear expects {self.in_dim}-vectors, got {x.shape}")
        if x.ndim == 1:
            return core.reshape(self.vectors(core.reshape(x, (1, -1))), (self.out_dim,))
        return core.add(core.matmul(x, core.transpose(self.weight)), self.bias)


class Conv1d(Module):
    def __init__(self, in_ch: int, out_ch: int, kernel: int, rng: np.random.Generator,
                 dilation: int = 1, bias: bool = True, dtype="f32"):
        dt = core._dtype_of(dtype)
        if kernel % 2 == 0:
            raise ValueError("only odd kernels keep 'same' length")
        self.in_ch, self.out_ch, self.kernel, self.dilation = in_ch, out_ch, kernel, dilation
        self.pad = dilation * (kernel - 1) // 2
        self.weight = Parameter(he_uniform(rng, (out_ch, in_ch, kernel), in_ch * kernel, dt))
        self.bias = Parameter(np.zeros(out_ch, dtype=dt)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return core.conv1d(x, self.weight, self.bias, pad=self.pad, dilation=self.dilation)

    __call__ = forward


class BatchNorm1d(Module):
    """Per-channel normalization over batch and time.

    Training mode normalizes with the batch statistics (population variance)
    and updates the running averages; eval mode uses the running averages.
    """

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5, dtype="f32"):
        if eps <= 0:
            raise ValueError("eps must be positive")
        dt = core._dtype_of(dtype)
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.gamma = Parameter(np.ones(channels, dtype=dt))
        self.beta = Parameter(np.zeros(channels, dtype=dt))
        self.running_mean = np.zeros(channels, dtype=dt)
        self.running_var = np.ones(channels, dtype=dt)

    def own_buffers(self):
        yield "running_mean", self.running_mean
        yield "running_var", self.running_var

    def forward(self, x: Tensor) -> Tensor:
        x, unb = _batched(x)
        if x.shape[1] != self.channels:
            raise ValueError(f"BatchNorm1d expects {self.channels} channels, got {x.shape}")
        if self.training:
            mean = core.reduce_mean(x, axis=(0, 2), keepdims=True)
            var = core.reduce_var(x, axis=(0, 2), keepdims=True)
            m = self.momentum
            self.running_mean = ((1 - m) * self.running_mean
                                 + m * mean.data.reshape(-1)).astype(self.running_mean.dtype)
            self.running_var = ((1 - m) * self.running_var
                                + m * var.data.reshape(-1)).astype(self.running_var.dtype)
            xhat = core.div(core.sub(x, mean), core.sqrt(core.add(var, self.eps)))
        else:
            mean = self.running_mean.reshape(1, -1, 1)
            inv = 1.0 / np.sqrt(self.running_var.reshape(1, -1, 1) + self.eps)
            xhat = core.mul(core.sub(x, Tensor(mean, dtype=x.dtype)), Tensor(inv, dtype=x.dtype))
        c = self.channels
        y = core.add(core.mul(xhat, core.reshape(self.gamma, (c, 1))),
                     core.reshape(self.beta, (c, 1)))
        return _unbatch(y, unb)

    __call__ = forward


class SEBlock(Module):
    """Squeeze-and-excitation: per-channel gates from the time-averaged input."""

    def __init__(self, channels: int, ratio: int, rng: np.random.Generator, dtype="f32"):
        if ratio < 1 or channels % ratio:
            raise ValueError(f"SE ratio {ratio} must divide {channels} channels")
        self.channels, self.ratio = channels, ratio
        self.fc1 = Linear(channels, channels // ratio, rng, dtype)
        self.fc2 = Linear(channels // ratio, channels, rng, dtype)

    def gates(self, x: Tensor) -> Tensor:
        squeeze = core.reduce_mean(x, axis=2)              # [B, C]
        hidden = core.relu(self.fc1.vectors(squeeze))
        return core.sigmoid(self.fc2.vectors(hidden))

    def forward(self, x: Tensor) -> Tensor:
        x, unb = _batched(x)
        if x.shape[1] != self.channels:
            raise ValueError(f"SEBlock expects {self.channels} channels, got {x.shape}")
        s = self.gates(x)
        y = core.mul(x, core.reshape(s, s.shape + (1,)))
        return _unbatch(y, unb)

    __call__ = forward


ATTENTION_MODES = ("shared", "channel", "context")


class AttStatsPool(Module):
    """Attentive statistics pooling: ``[B, C, T] -> [B, 2C]`` (mean then std).

    A ``tanh`` bottleneck of width ``bottleneck`` scores every frame.  Modes:

    ``shared``
        one score per frame shared by all channels (``C -> B -> 1``).
    ``channel``
        a separate score per channel (``C -> B -> C``).
    ``context``
        as ``channel`` but the bottleneck also sees the utterance-level mean
        and standard deviation (``3C -> B -> C``); the global part is applied
        once per utterance and broadcast over frames.
    """

    def __init__(self, channels: int, bottleneck: int, rng: np.random.Generator,
                 mode: str = "context", eps: float = 1e-9, dtype="f32"):
        if mode not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {mode!r}")
        self.channels, self.bottleneck, self.mode, self.eps = channels, bottleneck, mode, eps
        dt = core._dtype_of(dtype)
        fan_in = channels * (3 if mode == "context" else 1)
        self.attn_in = Linear(channels, bottleneck, rng, dtype, fan_in=fan_in)
        if mode == "context":
            self.attn_ctx = Parameter(he_uniform(rng, (bottleneck, 2 * channels), fan_in, dt))
        self.attn_out = Linear(bottleneck, 1 if mode == "shared" else channels, rng, dtype)

    @property
    def out_dim(self) -> int:
        return 2 * self.channels

    def scores(self, x: Tensor) -> Tensor:
        h = self.attn_in(x)                                   # [B, Bn, T]
        if self.mode == "context":
            mu = core.reduce_mean(x, axis=2)
            sd = core.sqrt(core.add(core.reduce_var(x, axis=2), self.eps))
            ctx = core.matmul(core.concat_channels([mu, sd], axis=1),
                              core.transpose(self.attn_ctx))  # [B, Bn]
            h = core.add(h, core.reshape(ctx, ctx.shape + (1,)))
        return self.attn_out(core.tanh(h))                    # [B, C or 1, T]

    def forward(self, x: Tensor) -> Tensor:
        x, unb = _batched(x)
        if x.shape[1] != self.channels:
            raise ValueError(f"AttStatsPool expects {self.channels} channels, got {x.shape}")
        if x.shape[2] < 1:
            raise ValueError("AttStatsPool needs at least one frame")
        alpha = core.softmax(self.scores(x), axis=2)
        mu = core.reduce_sum(core.mul(alpha, x), axis=2)      # [B, C]
        centered = core.sub(x, core.reshape(mu, mu.shape + (1,)))
        var = core.reduce_sum(core.mul(alpha, core.mul(centered, centered)), axis=2)
        sd = core.sqrt(core.add(var, self.eps))
        out = core.concat_channels([mu, sd], axis=1)
        return core.reshape(out, (out.shape[1],)) if unb else out

    __call__ = forward


class LayerAggregator(Module):
    """Softmax-weighted sum over a stack of front-end layers ``[B, L, C, T]``."""

    def __init__(self, layers: int, dtype="f32"):
        if layers < 1:
            raise ValueError("need at least one layer")
        self.layers = layers
        self.logits = Parameter(np.zeros(layers, dtype=core._dtype_of(dtype)))

    def weights(self) -> Tensor:
        return core.softmax(self.logits, axis=0)

    def forward(self, stack: Tensor) -> Tensor:
        axis = stack.ndim - 3
        if stack.ndim not in (3, 4) or stack.shape[axis] != self.layers:
            raise ValueError(f"expected {self.layers} stacked layers, got {stack.shape}")
        return core.weighted_sum(stack, self.weights(), axis=axis)

    __call__ = forward
