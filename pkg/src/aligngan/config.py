"""Plain-text experiment configs: key=value lines, # comments.

Unknown keys are rejected by name; parse -> serialize -> parse is the
identity on the parsed object.
"""
from __future__ import annotations

from dataclasses import dataclass, fields

from .objectives import ObjectiveKind
from .training import TrainConfig

TASKS = ("negation_2d", "glyph_negative", "glyph_edge", "idx_pair",
         "multi_info_glyph")


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    task: str = "negation_2d"
    objective: str = "lsgan"
    learning_rate: float = 0.0005
    beta1: float = 0.5
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 64
    total_steps: int = 1000
    tau: int = 4
    seed: int = 0
    metric_every: int = 500
    checkpoint_every: int = 500
    saturating_g: bool = False
    noise_dim: int = 4
    hidden: tuple = (32, 32)
    base_channels: int = 16
    normalize: bool = False
    class_count: int = 3
    jitter: float = 0.1
    dataset_size: int = 4096
    idx_images_a: str = ""
    idx_images_b: str = ""
    out_dir: str = "out"

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS}")
        if self.objective not in ("lsgan", "regular_gan"):
            raise ConfigError(f"unknown objective {self.objective!r}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.tau < 2:
            raise ConfigError("tau must be >= 2")
        if self.total_steps < 0:
            raise ConfigError("total_steps must be >= 0")

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            objective=ObjectiveKind(self.objective),
            learning_rate=self.learning_rate,
            total_steps=self.total_steps,
            seed=self.seed,
            beta1=self.beta1,
            beta2=self.beta2,
            adam_eps=self.adam_eps,
            batch_size=self.batch_size,
            tau=self.tau,
            metric_every=self.metric_every,
            checkpoint_every=self.checkpoint_every,
            saturating_g=self.saturating_g,
        )


_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _parse_value(key: str, text: str):
    default = getattr(ExperimentConfig, key)
    try:
        if isinstance(default, bool):
            if text not in ("true", "false"):
                raise ValueError
            return text == "true"
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            return tuple(int(p) for p in text.split(",") if p)
        return text
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {text!r}") from None


def _format_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        if key not in _FIELDS:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _parse_value(key, raw.strip())
    return ExperimentConfig(**values)


def serialize_config(cfg: ExperimentConfig) -> str:
    lines = [f"{f.name}={_format_value(getattr(cfg, f.name))}"
             for f in fields(ExperimentConfig)]
    return "\n".join(lines) + "\n"


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text)
