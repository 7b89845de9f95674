"""Text side of the model: phoneme/style tokens to the conditioning tensor.

The acoustic pattern encoder sums phoneme and style embeddings, adds
sinusoidal positions and runs a stack of FFT blocks.  A duration predictor
reads the (gradient-stopped) encoder output; the length regulator repeats
each token's row by its duration, and the integration encoder maps the
expanded sequence to ``[n_lat, m]`` at latent frame rate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Conv1d, Embedding, FFTBlock, LayerNorm, Linear, Module, Tensor, no_grad, relu
from .core.tensor import getitem, mean, stop_gradient
from .errors import DimensionError, InputError


class Vocabulary:
    """Token list where the line number is the id."""

    def __init__(self, tokens: Sequence[str], name: str = "vocabulary"):
        self.tokens = list(tokens)
        self.name = name
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise InputError(f"{name} has duplicate tokens")

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls([ln for ln in lines if ln], Path(path).stem)

    @classmethod
    def default(cls, kind: str) -> "Vocabulary":
        """``kind`` is ``"phonemes"`` or ``"styles"``."""
        text = resources.files("latentspeech.data").joinpath(f"{kind}.txt").read_text(encoding="utf-8")
        return cls([ln.strip() for ln in text.splitlines() if ln.strip()], kind)

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: Sequence[str]) -> list[int]:
        try:
            return [self.index[t] for t in tokens]
        except KeyError as exc:
            raise InputError(f"token {exc.args[0]!r} is not in the {self.name}") from None


@dataclass
class TokenSequence:
    phonemes: list[int]
    styles: list[int]

    def __post_init__(self):
        if len(self.phonemes) != len(self.styles):
            raise InputError(f"{len(self.phonemes)} phonemes but {len(self.styles)} styles")
        if not self.phonemes:
            raise InputError("token sequence is empty")

    def __len__(self) -> int:
        return len(self.phonemes)

    @classmethod
    def from_tokens(cls, phonemes: Sequence[str], styles: Sequence[str], pv: Vocabulary, sv: Vocabulary):
        return cls(pv.encode(phonemes), sv.encode(styles))


@dataclass
class AcousticEmbedding:
    hidden: Tensor  # [n_tokens, d_model], encoder output
    phoneme: Tensor  # H_P
    style: Tensor  # H_S
    fused: Tensor = field(init=False)  # H = H_P + H_S, before positions and FFT blocks

    def __post_init__(self):
        self.fused = self.phoneme + self.style


@dataclass
class TtsConfig:
    d_model: int = 128
    ape_layers: int = 3
    int_layers: int = 3
    heads: int = 2
    ff_hidden: int = 256
    kernel: int = 9
    n_lat: int = 16
    predictor_hidden: int = 128
    predictor_kernel: int = 3
    n_phonemes: int = 61
    n_styles: int = 6


def sinusoid_positions(length: int, dim: int) -> np.ndarray:
    """Interleaved sin/cos positional table, ``[length, dim]``."""
    pos = np.arange(length)[:, None]
    freq = 10000.0 ** (-np.arange(0, dim, 2) / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(pos * freq)
    table[:, 1::2] = np.cos(pos * freq)
    return table


def durations_from_log(pred_log) -> np.ndarray:
    """Log-domain predictions to integer frame counts, ``round(exp(x) - 1)`` clamped at 0."""
    x = np.asarray(pred_log.data if isinstance(pred_log, Tensor) else pred_log, dtype=np.float64)
    return np.maximum(np.round(np.exp(x) - 1.0), 0).astype(np.int64)


def length_regulate(hidden: Tensor, durations: Sequence[int]) -> Tensor:
    """Repeat row ``i`` of ``hidden`` ``durations[i]`` times."""
    d = np.asarray(durations, dtype=np.int64)
    if d.ndim != 1 or len(d) != hidden.shape[0]:
        raise DimensionError(f"{len(d)} durations for {hidden.shape[0]} tokens")
    if (d < 0).any():
        raise InputError("durations must be non-negative")
    if d.sum() == 0:
        raise InputError("all durations are zero, nothing to regulate")
    return getitem(hidden, np.repeat(np.arange(len(d)), d))


def duration_loss(pred_log, target: Sequence[int]) -> Tensor:
    """Mean squared error between predictions and ``log(1 + l)``."""
    pred = pred_log if isinstance(pred_log, Tensor) else Tensor(np.asarray(pred_log, dtype=np.float64))
    t = np.log1p(np.asarray(target, dtype=np.float64))
    if pred.shape != t.shape:
        raise DimensionError(f"{pred.shape[0]} predictions for {len(t)} durations")
    diff = pred - t
    return mean(diff * diff)


class DurationPredictor(Module):
    def __init__(self, cfg: TtsConfig, rng: np.random.Generator):
        self.conv1 = Conv1d(cfg.d_model, cfg.predictor_hidden, cfg.predictor_kernel, rng)
        self.norm1 = LayerNorm(cfg.predictor_hidden)
        self.conv2 = Conv1d(cfg.predictor_hidden, cfg.predictor_hidden, cfg.predictor_kernel, rng)
        self.norm2 = LayerNorm(cfg.predictor_hidden)
        self.out = Linear(cfg.predictor_hidden, 1, rng)

    def __call__(self, h: Tensor) -> Tensor:
        x = self.norm1(relu(self.conv1(h.T)).T)
        x = self.norm2(relu(self.conv2(x.T)).T)
        return self.out(x).reshape((h.shape[0],))


class TtsEncoder(Module):
    def __init__(self, cfg: TtsConfig | None = None, seed: int = 0):
        self.config = cfg = cfg or TtsConfig()
        rng = np.random.default_rng(seed)
        self.phoneme_table = Embedding(cfg.n_phonemes, cfg.d_model, rng)
        self.style_table = Embedding(cfg.n_styles, cfg.d_model, rng)
        self.ape = [FFTBlock(cfg.d_model, cfg.heads, cfg.ff_hidden, cfg.kernel, rng) for _ in range(cfg.ape_layers)]
        self.predictor = DurationPredictor(cfg, rng)
        self.integration = [
            FFTBlock(cfg.d_model, cfg.heads, cfg.ff_hidden, cfg.kernel, rng) for _ in range(cfg.int_layers)
        ]
        self.proj = Linear(cfg.d_model, cfg.n_lat, rng)

    def _check_ids(self, seq: TokenSequence) -> None:
        for ids, n, what in ((seq.phonemes, self.config.n_phonemes, "phoneme"), (seq.styles, self.config.n_styles, "style")):
            bad = [i for i in ids if not 0 <= i < n]
            if bad:
                raise InputError(f"{what} id {bad[0]} outside vocabulary of {n}")

    def encode_acoustic(self, seq: TokenSequence) -> AcousticEmbedding:
        self._check_ids(seq)
        emb = AcousticEmbedding(None, self.phoneme_table(seq.phonemes), self.style_table(seq.styles))
        x = emb.fused + Tensor(sinusoid_positions(len(seq), self.config.d_model))
        for block in self.ape:
            x = block(x)
        emb.hidden = x
        return emb

    def predict_durations(self, emb: AcousticEmbedding) -> Tensor:
        """Log-domain durations, one per token; the encoder is not trained through this path."""
        return self.predictor(stop_gradient(emb.hidden))

    def integrate(self, regulated: Tensor) -> Tensor:
        """``[m, d_model]`` -> conditioning ``[n_lat, m]``."""
        if regulated.shape[0] < 1:
            raise InputError("regulated sequence is empty")
        x = regulated + Tensor(sinusoid_positions(regulated.shape[0], self.config.d_model))
        for block in self.integration:
            x = block(x)
        return self.proj(x).T

    def __call__(self, seq: TokenSequence, durations: Sequence[int] | None = None):
        """Conditioning plus log-duration predictions.

        Ground-truth ``durations`` drive the length regulator when given,
        otherwise the rounded predictions do.
        """
        emb = self.encode_acoustic(seq)
        pred = self.predict_durations(emb)
        frames = durations if durations is not None else durations_from_log(pred)
        return self.integrate(length_regulate(emb.hidden, frames)), pred

    def condition(self, seq: TokenSequence, durations: Sequence[int] | None = None) -> np.ndarray:
        with no_grad():
            cond, _ = self(seq, durations)
        return cond.data
