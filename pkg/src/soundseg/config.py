"""Run configuration: defaults, key-value config files, CLI overrides.

Config files are UTF-8 text with one dotted key per line::

    model.num_queries = 8
    optim.lr = 1e-4
    # comments and blank lines are ignored
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .audio import SpectrogramConfig
from .errors import ParseError
from .objective import CostConfig


@dataclass(frozen=True)
class ModelConfig:
    c_av: int = 256
    dim: int = 256
    num_queries: int = 16
    heads: int = 8
    l_enc: int = 3
    l_dec: int = 3
    c_m: int = 64
    c_a: int = 128
    mask_stride: int = 4
    visual_channels: tuple = (32, 64, 128, 256)
    threshold: float = 0.5
    temporal_encoding: bool = True
    audio_queries: bool = True  # ablation switch for the query content init


@dataclass(frozen=True)
class OptimConfig:
    lr: float = 1e-4
    weight_decay: float = 5e-4
    epochs: int = 10
    batch_size: int = 8
    max_steps: int = 0  # 0 = no cap beyond epochs


@dataclass(frozen=True)
class DataConfig:
    manifest: str = ""
    root: str = ""
    test_fraction: float = 0.0833


@dataclass(frozen=True)
class RunConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    optim: OptimConfig = field(default_factory=OptimConfig)
    loss: CostConfig = field(default_factory=CostConfig)
    audio: SpectrogramConfig = field(default_factory=SpectrogramConfig)
    data: DataConfig = field(default_factory=DataConfig)
    seed: int = 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


_SECTIONS = {
    "model": ModelConfig,
    "optim": OptimConfig,
    "loss": CostConfig,
    "audio": SpectrogramConfig,
    "data": DataConfig,
}


def _coerce(current, text: str):
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes", "on"):
            return True
        if text.lower() in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        return tuple(int(p) for p in text.replace(",", " ").split())
    return text


def _apply(cfg: RunConfig, key: str, value: str) -> RunConfig:
    if key == "seed":
        return dataclasses.replace(cfg, seed=int(value))
    if "." not in key:
        raise ParseError(f"expected section.key, got {key!r}")
    section, name = key.split(".", 1)
    if section not in _SECTIONS:
        raise ParseError(f"unknown section {section!r}")
    sub = getattr(cfg, section)
    if not hasattr(sub, name):
        raise ParseError(f"unknown key {key!r}")
    coerced = _coerce(getattr(sub, name), value)
    return dataclasses.replace(cfg, **{section: dataclasses.replace(sub, **{name: coerced})})


def load_config(path=None, overrides=()) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then overrides."""
    cfg = RunConfig()
    if path is not None:
        text = Path(path).read_text(encoding="utf-8")
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError("expected key = value", line=lineno)
            key, _, value = stripped.partition("=")
            try:
                cfg = _apply(cfg, key.strip(), value.strip())
            except (ValueError, ParseError) as exc:
                raise ParseError(str(exc), line=lineno) from exc
    for item in overrides:
        key, _, value = item.partition("=")
        cfg = _apply(cfg, key.strip(), value.strip())
    return cfg
