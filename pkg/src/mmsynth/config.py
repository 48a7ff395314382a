"""Flat key-value training configuration.

One `key = value` pair per line, `#` comments allowed. Unknown keys are
rejected by name so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import ConfigError

_CHOICES = {
    "noise": ("normal", "uniform"),
    "norm": ("equalize", "batch", "instance"),
    "fade": ("trainable", "linear"),
}


@dataclass
class TrainConfig:
    c: int = 3
    d_a: int = 3
    max_resolution: int = 32
    width_factor: float = 0.25
    noise: str = "normal"
    norm: str = "equalize"
    fade: str = "trainable"
    lambda_gp: float = 10.0
    lambda_cls: float = 1.0
    lr: float = 0.001
    batch: int = 16
    seed: int = 0
    schedule_scale: float = 100.0
    data_manifest: str = ""
    out_dir: str = "out"

    def __post_init__(self):
        for key, choices in _CHOICES.items():
            if getattr(self, key) not in choices:
                raise ConfigError(f"{key} must be one of {choices}, got {getattr(self, key)!r}")
        if self.c < 1 or self.d_a < 1:
            raise ConfigError("c and d_a must be >= 1")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.lr <= 0:
            raise ConfigError("lr must be > 0")
        if self.schedule_scale <= 0:
            raise ConfigError("schedule_scale must be > 0")
        if self.lambda_gp < 0 or self.lambda_cls < 0:
            raise ConfigError("loss weights must be >= 0")


CONFIG_KEYS = tuple(f.name for f in fields(TrainConfig))
_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _parse_value(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {key}: {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> TrainConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, val = (part.strip() for part in line.partition("="))
        if key not in CONFIG_KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown config key: {key}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate config key: {key}")
        values[key] = _parse_value(key, val)
    return TrainConfig(**values)


def load_config(path) -> TrainConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text(), source=str(path))


def config_text(cfg: TrainConfig) -> str:
    return "\n".join(f"{k} = {v}" for k, v in asdict(cfg).items()) + "\n"
