"""Run configuration: nested dataclasses loaded from JSON with strict key checking."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from ..errors import ConfigError


@dataclass
class PqmfSection:
    n_bands: int = 16
    attenuation: float = 100.0
    taps: int | None = None


@dataclass
class AeSection:
    latent_channels: int = 16
    strides: list[int] = field(default_factory=lambda: [4, 4, 2, 2])
    channels: list[int] = field(default_factory=lambda: [32, 64, 128, 128])
    slope: float = 0.2
    crop: int = 16384
    batch: int = 8
    lr: float = 5e-3
    steps: int = 2000
    log_eps: float = 1.0


@dataclass
class TtsSection:
    d_model: int = 128
    ape_layers: int = 3
    int_layers: int = 3
    heads: int = 2
    ff_hidden: int = 256
    kernel: int = 9
    phoneme_vocab: str | None = None  # None selects the packaged vocabulary
    style_vocab: str | None = None


@dataclass
class DiffusionSection:
    T: int = 50
    beta_start: float = 1e-4
    beta_end: float = 0.2  # alpha_hat_T ~ 0.005, so z_T is close to N(0, I)
    channels: int = 64
    blocks: int = 10
    cycle: int = 10
    sigma: str = "beta"


@dataclass
class TrainSection:
    batch: int = 8
    steps: int = 5000
    epochs: int = 0  # when positive, overrides steps
    lr: float = 2e-3
    decay_at: float = 0.7  # fraction of steps after which lr is multiplied by decay
    decay: float = 0.3
    duration_weight: float = 0.1
    tts_lr_scale: float = 0.1  # TTS encoder lr = lr * tts_lr_scale
    seed: int = 0


@dataclass
class EvalSection:
    asr_url: str | None = None
    asr_timeout: float = 30.0
    asr_attempts: int = 3
    workers: int = 4
    mcd_align: bool = True


@dataclass
class Config:
    sample_rate: int = 48000
    pqmf: PqmfSection = field(default_factory=PqmfSection)
    ae: AeSection = field(default_factory=AeSection)
    tts: TtsSection = field(default_factory=TtsSection)
    diffusion: DiffusionSection = field(default_factory=DiffusionSection)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalSection = field(default_factory=EvalSection)

    def validate(self) -> "Config":
        positive = {
            "sample_rate": self.sample_rate, "pqmf.n_bands": self.pqmf.n_bands,
            "ae.latent_channels": self.ae.latent_channels, "ae.crop": self.ae.crop, "ae.batch": self.ae.batch,
            "tts.d_model": self.tts.d_model, "tts.heads": self.tts.heads, "diffusion.T": self.diffusion.T,
            "diffusion.channels": self.diffusion.channels, "diffusion.blocks": self.diffusion.blocks,
            "diffusion.cycle": self.diffusion.cycle, "train.batch": self.train.batch,
            "eval.asr_attempts": self.eval.asr_attempts, "eval.workers": self.eval.workers,
        }
        for name, value in positive.items():
            if value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        for name, value in {"ae.steps": self.ae.steps, "train.steps": self.train.steps, "train.epochs": self.train.epochs}.items():
            if value < 0:
                raise ConfigError(f"{name} must be non-negative, got {value}")
        if self.tts.d_model % self.tts.heads:
            raise ConfigError("tts.d_model must be divisible by tts.heads")
        if len(self.ae.strides) != len(self.ae.channels):
            raise ConfigError("ae.strides and ae.channels need the same length")
        if self.ae.crop % (self.pqmf.n_bands * _prod(self.ae.strides)):
            raise ConfigError("ae.crop must be a whole number of latent frames")
        if not 0 < self.diffusion.beta_start <= self.diffusion.beta_end < 1:
            raise ConfigError("need 0 < diffusion.beta_start <= diffusion.beta_end < 1")
        if self.diffusion.sigma not in ("beta", "beta_hat"):
            raise ConfigError("diffusion.sigma must be 'beta' or 'beta_hat'")
        if not 0 <= self.train.decay_at <= 1 or self.train.decay <= 0:
            raise ConfigError("need 0 <= train.decay_at <= 1 and train.decay > 0")
        if self.train.tts_lr_scale <= 0:
            raise ConfigError("train.tts_lr_scale must be positive")
        if self.ae.lr < 0 or self.train.lr < 0 or self.train.duration_weight < 0:
            raise ConfigError("learning rates and loss weights must be non-negative")
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _prod(values) -> int:
    out = 1
    for v in values:
        out *= v
    return out


def _build(cls, data: dict, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key(s) in {where or 'config'}: {', '.join(unknown)}")
    kwargs = {}
    for name, value in data.items():
        default = getattr(cls(), name)
        path = f"{where}.{name}" if where else name
        if dataclasses.is_dataclass(default):
            kwargs[name] = _build(type(default), value, path)
        else:
            kwargs[name] = _coerce(value, default, path)
    return cls(**kwargs)


def _coerce(value, default, path):
    if default is None or value is None:
        return value
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path} must be true or false")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, list):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(f"{path} must be a list of integers")
        return list(value)
    if isinstance(default, str) and not isinstance(value, str):
        raise ConfigError(f"{path} must be a string")
    return value


def config_from_dict(data: dict) -> Config:
    return _build(Config, data, "").validate()


PRESETS: dict[str, dict] = {
    "desk": {},
    # fast settings for the synthetic corpus and tests
    "toy": {"ae": {"steps": 2000}, "train": {"steps": 2500, "batch": 8}},
    # full-scale training (batch 64, 300 epochs); far beyond a laptop budget
    "full": {"ae": {"crop": 65536, "batch": 64}, "train": {"batch": 64, "epochs": 300}},
}


def _merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for k, v in override.items():
        out[k] = _merge(out[k], v) if isinstance(v, dict) and isinstance(out.get(k), dict) else v
    return out


def preset(name: str) -> Config:
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    return config_from_dict(PRESETS[name])


def load_config(path: str | Path | None = None, overrides: dict | None = None) -> Config:
    """Read a JSON config file; ``None`` gives the desk defaults.

    A top-level ``"preset"`` key picks a base profile that the file then overrides.
    """
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: top level must be a JSON object")
    base = PRESETS.get(data.get("preset", "desk"))
    if base is None:
        raise ConfigError(f"unknown preset {data['preset']!r}")
    data = {k: v for k, v in data.items() if k != "preset"}
    return config_from_dict(_merge(_merge(base, data), overrides or {}))
