"""Layered configuration: defaults < profile < config file < explicit overrides.

Config files are plain ``key = value`` lines grouped under ``[section]``
headers, one section per component::

    [train]
    epochs = 30
    lr_max = 0.002

    [augment]
    time_masks = 2
"""
from __future__ import annotations

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields, replace

from .augment import AugmentConfig
from .errors import ConfigError
from .features import FrontendConfig
from .model.network import ClassifierConfig, EtEncoderConfig
from .preprocess import PreprocessConfig
from .train_eval.optim import TrainConfig


@dataclass(frozen=True)
class PipelineConfig:
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    encoder: EtEncoderConfig = field(default_factory=EtEncoderConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)
    train: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed):
        return replace(self, train=replace(self.train, seed=int(seed)))

    def to_dict(self):
        return dataclasses.asdict(self)

    def fingerprint(self, *extra):
        blob = json.dumps([self.to_dict(), *extra], sort_keys=True, default=str)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


SECTIONS = ("preprocess", "frontend", "augment", "encoder", "classifier", "train")

PROFILES = {
    # small enough to train on a laptop CPU in minutes
    "desk": {
        "train": dict(epochs=30, batch_size=8, lr_max=2e-3, lr_min=1e-5,
                      cycle_len_epochs=30, warmup_epochs=3, alpha_lr_scale=400.0),
    },
    "paper_scale": {
        "train": dict(epochs=3900, batch_size=32, lr_max=3e-4, lr_min=1e-6,
                      cycle_len_epochs=300, warmup_epochs=30, alpha_lr_scale=1.0),
    },
}


def _coerce(cls, key, raw):
    """Convert a string from a config file to the field's type."""
    names = {f.name: f for f in fields(cls)}
    if key not in names:
        raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
    default = getattr(cls(), key)
    if not isinstance(raw, str):
        return raw
    try:
        if isinstance(default, bool):
            return raw.strip().lower() in ("1", "true", "yes", "on")
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        if isinstance(default, tuple):
            return tuple(int(v) for v in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"{cls.__name__}.{key}: cannot parse {raw!r}") from exc
    return raw


def apply_section(cfg: PipelineConfig, section: str, values: dict) -> PipelineConfig:
    if section not in SECTIONS:
        raise ConfigError(f"unknown config section [{section}]")
    current = getattr(cfg, section)
    cls = type(current)
    updates = {k: _coerce(cls, k, v) for k, v in values.items()}
    try:
        return replace(cfg, **{section: replace(current, **updates)})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def parse_config_text(text: str) -> dict:
    parser = configparser.ConfigParser(delimiters=("=",), comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    return {s: dict(parser[s]) for s in parser.sections()}


def load_config(path=None, profile="desk", overrides=None) -> PipelineConfig:
    """Build the merged configuration.

    ``overrides`` maps ``"section.key"`` to a value and wins over everything.
    """
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r} (choose from {', '.join(PROFILES)})")
    cfg = PipelineConfig()
    for section, values in PROFILES[profile].items():
        cfg = apply_section(cfg, section, values)
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            for section, values in parse_config_text(fh.read()).items():
                if section == "paths":
                    continue
                cfg = apply_section(cfg, section, values)
    grouped: dict[str, dict] = {}
    for dotted, value in (overrides or {}).items():
        section, _, key = dotted.partition(".")
        grouped.setdefault(section, {})[key] = value
    for section, values in grouped.items():
        cfg = apply_section(cfg, section, values)
    return cfg


def format_config(cfg: PipelineConfig) -> str:
    lines = []
    for section in SECTIONS:
        lines.append(f"[{section}]")
        for k, v in dataclasses.asdict(getattr(cfg, section)).items():
            if isinstance(v, (tuple, list)):
                v = ", ".join(str(x) for x in v)
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)
