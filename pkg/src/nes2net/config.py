"""Run configuration files: ``[section]`` headers with ``key = value`` lines.

Sections are ``[model]``, ``[train]``, ``[data]`` and ``[eval]``.  Every key
maps onto a field of the matching dataclass and unknown keys are rejected.
"""
from __future__ import annotations

import configparser
import dataclasses
import types
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .models import ModelConfig
from .training.data import SyntheticDataConfig
from .training.trainer import TrainConfig


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class EvalConfig:
    p_target: float = 0.05
    c_miss: float = 1.0
    c_fa: float = 10.0

    def __post_init__(self):
        if not 0 < self.p_target < 1 or self.c_miss <= 0 or self.c_fa <= 0:
            raise ValueError("need 0 < p_target < 1 and positive costs")


SECTIONS = {
    "model": ModelConfig,
    "train": TrainConfig,
    "data": SyntheticDataConfig,
    "eval": EvalConfig,
}
# supplied by --seed or derived from [model], never written in the file
RESERVED = {"data": {"seed", "dim", "layers"}}


@dataclass
class RunConfig:
    model: ModelConfig
    train: TrainConfig = field(default_factory=TrainConfig)
    data: SyntheticDataConfig | None = None
    eval: EvalConfig = field(default_factory=EvalConfig)
    sections: frozenset = frozenset()

    def data_for(self, seed: int) -> SyntheticDataConfig:
        if self.data is None:
            raise ConfigError("config has no [data] section")
        return dataclasses.replace(self.data, seed=seed)


def _coerce(name: str, raw: str, typ):
    origin = typing.get_origin(typ)
    args = typing.get_args(typ)
    if origin in (typing.Union, types.UnionType):
        if raw.strip().lower() in ("none", ""):
            return None
        typ = next(a for a in args if a is not type(None))
        origin, args = typing.get_origin(typ), typing.get_args(typ)
    if origin is tuple:
        parts = [p for p in raw.replace(",", " ").split() if p]
        if len(parts) != len(args):
            raise ConfigError(f"{name}: expected {len(args)} values, got {raw!r}")
        return tuple(_coerce(name, p, a) for p, a in zip(parts, args))
    try:
        if typ is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
    except ValueError:
        raise ConfigError(f"{name}: cannot parse {raw!r} as {typ.__name__}") from None
    return raw


def _section(parser, section: str, cls, extra: dict | None = None):
    hints = typing.get_type_hints(cls)
    fields = {f.name for f in dataclasses.fields(cls)}
    allowed = fields - RESERVED.get(section, set())
    kwargs = dict(extra or {})
    if parser.has_section(section):
        for key, raw in parser.items(section):
            if key not in allowed:
                raise ConfigError(f"[{section}] unknown key {key!r}; allowed: {sorted(allowed)}")
            kwargs[key] = _coerce(f"{section}.{key}", raw, hints[key])
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def parse_config(text: str) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",), delimiters=("=",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    unknown = set(parser.sections()) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s) {sorted(unknown)}")
    if not parser.has_section("model"):
        raise ConfigError("missing [model] section")
    model = _section(parser, "model", ModelConfig)
    train = _section(parser, "train", TrainConfig)
    data = None
    if parser.has_section("data"):
        data = _section(parser, "data", SyntheticDataConfig,
                        {"dim": model.input_dim, "layers": model.frontend_layers})
    ev = _section(parser, "eval", EvalConfig)
    return RunConfig(model, train, data, ev, frozenset(parser.sections()))


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)
