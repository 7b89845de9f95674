"""Convolutional autoencoder between PQMF subbands and the latent space.

The encoder downsamples the subbands by ``prod(strides)`` and squashes the
result through ``tanh``; the decoder mirrors it with transposed
convolutions.  With 16 bands and strides (4, 4, 2, 2) one latent frame
covers 1024 audio samples, so 10 s at 48 kHz becomes a [16 x 469] latent.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Conv1d, ConvTranspose1d, Module, ParamStore, Tensor, adam_step, leaky_relu, no_grad, tanh
from .dsp.pqmf import PqmfBank, analysis_array, synthesis_array
from .dsp.signals import SubbandSignal, Waveform, as_samples
from .dsp.spectral import DEFAULT_SCALES, spectral_distance_tensor
from .errors import ConfigError, DimensionError, NumericError


@dataclass
class AeConfig:
    n_bands: int = 16
    latent_channels: int = 16
    strides: tuple[int, ...] = (4, 4, 2, 2)
    channels: tuple[int, ...] = (32, 64, 128, 128)
    slope: float = 0.2

    def __post_init__(self):
        self.strides = tuple(self.strides)
        self.channels = tuple(self.channels)
        if len(self.strides) != len(self.channels):
            raise ConfigError("one channel width is needed per stride")
        if any(s < 2 or s % 2 for s in self.strides):
            raise ConfigError(f"strides must be even and >= 2, got {self.strides}")

    @property
    def downsample(self) -> int:
        return int(np.prod(self.strides))


@dataclass
class LatentEmbedding:
    values: np.ndarray  # [latent_channels, L_lat]
    frame_hop: int = 1024

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


class Encoder(Module):
    def __init__(self, cfg: AeConfig, rng: np.random.Generator):
        self.slope = cfg.slope
        widths = (cfg.n_bands,) + cfg.channels
        self.blocks = [
            Conv1d(c_in, c_out, 2 * s + 1, rng, stride=s, padding=s)
            for c_in, c_out, s in zip(widths[:-1], widths[1:], cfg.strides)
        ]
        self.proj = Conv1d(widths[-1], cfg.latent_channels, 1, rng)

    def __call__(self, x: Tensor) -> Tensor:
        for block in self.blocks:
            x = leaky_relu(block(x), self.slope)
        return tanh(self.proj(x))


class Decoder(Module):
    def __init__(self, cfg: AeConfig, rng: np.random.Generator):
        self.slope = cfg.slope
        widths = cfg.channels[::-1]
        self.proj = Conv1d(cfg.latent_channels, widths[0], 3, rng)
        outs = widths[1:] + (widths[-1],)
        self.blocks = [
            ConvTranspose1d(c_in, c_out, 2 * s, rng, stride=s, padding=s // 2)
            for c_in, c_out, s in zip(widths, outs, cfg.strides[::-1])
        ]
        self.out = Conv1d(outs[-1], cfg.n_bands, 7, rng)

    def __call__(self, z: Tensor) -> Tensor:
        x = leaky_relu(self.proj(z), self.slope)
        for block in self.blocks:
            x = leaky_relu(block(x), self.slope)
        return self.out(x)


class Autoencoder(Module):
    def __init__(self, cfg: AeConfig | None = None, seed: int = 0):
        self.config = cfg or AeConfig()
        rng = np.random.default_rng(seed)
        self.encoder = Encoder(self.config, rng)
        self.decoder = Decoder(self.config, rng)
        # per-channel standardization applied before diffusion
        self.latent_mean = np.zeros(self.config.latent_channels, dtype=np.float32)
        self.latent_std = np.ones(self.config.latent_channels, dtype=np.float32)

    @property
    def frame_hop(self) -> int:
        return self.config.n_bands * self.config.downsample

    def latent_length(self, n_samples: int) -> int:
        l_sub = -(-n_samples // self.config.n_bands)
        return -(-l_sub // self.config.downsample)

    def _check_bands(self, bands: np.ndarray) -> None:
        if bands.ndim < 2 or bands.shape[-2] != self.config.n_bands:
            raise ConfigError(f"expected {self.config.n_bands} subbands, got shape {bands.shape}")

    def encode(self, sub: SubbandSignal | np.ndarray) -> LatentEmbedding:
        bands = sub.bands if isinstance(sub, SubbandSignal) else np.asarray(sub)
        self._check_bands(bands)
        with no_grad():
            z = self.encoder(Tensor(bands))
        return LatentEmbedding(z.data, self.frame_hop)

    def decode(self, z: LatentEmbedding | np.ndarray, length: int | None = None) -> SubbandSignal:
        """Latents to subbands; ``length`` trims to a known subband length."""
        values = z.values if isinstance(z, LatentEmbedding) else np.asarray(z)
        if values.ndim != 2 or values.shape[0] != self.config.latent_channels:
            raise DimensionError(f"expected {self.config.latent_channels} latent channels, got {values.shape}")
        with no_grad():
            bands = self.decoder(Tensor(values)).data
        if length is not None:
            bands = bands[:, :length]
        return SubbandSignal(bands, length=None)

    def standardize(self, values: np.ndarray) -> np.ndarray:
        return ((values - self.latent_mean[:, None]) / self.latent_std[:, None]).astype(np.float32)

    def destandardize(self, values: np.ndarray) -> np.ndarray:
        return (values * self.latent_std[:, None] + self.latent_mean[:, None]).astype(np.float32)

    def reconstruct(self, bank: PqmfBank, audio) -> Waveform:
        """analysis -> encode -> decode -> synthesis, trimmed to the input length."""
        samples = as_samples(audio)
        rate = audio.sample_rate if isinstance(audio, Waveform) else 48000
        bands = analysis_array(bank, samples).astype(np.float32)
        decoded = self.decode(self.encode(bands), length=bands.shape[-1])
        return Waveform(synthesis_array(bank, decoded.bands, len(samples)), rate)


def ae_loss(
    ae: Autoencoder,
    bands: np.ndarray,
    scales: Sequence[int] = DEFAULT_SCALES,
    log_eps: float = 1.0,
) -> Tensor:
    """Spectral distance between subbands and their reconstruction, averaged over the batch."""
    bands = np.asarray(bands, dtype=np.float32)
    if bands.ndim == 2:
        bands = bands[None]
    length = bands.shape[-1]
    recon = ae.decoder(ae.encoder(Tensor(bands)))[..., :length]
    # the distance pools all bands and frames, so each item is scored separately
    total = None
    for i in range(bands.shape[0]):
        d = spectral_distance_tensor(bands[i], recon[i], scales, log_eps)
        total = d if total is None else total + d
    return total * (1.0 / bands.shape[0])


def ae_train_step(
    ae: Autoencoder,
    store: ParamStore,
    bank: PqmfBank,
    batch: Sequence[Waveform] | np.ndarray,
    lr: float,
    scales: Sequence[int] = DEFAULT_SCALES,
    log_eps: float = 1.0,
) -> float:
    """One Adam step on the spectral loss of an equal-length audio batch.

    Returns the loss measured before the update.
    """
    if len(batch) == 0:
        raise ValueError("empty batch")
    audio = np.stack([as_samples(w) for w in batch]) if not isinstance(batch, np.ndarray) else batch
    bands = analysis_array(bank, audio).astype(np.float32)
    store.zero_grad()
    loss = ae_loss(ae, bands, scales, log_eps)
    loss.backward()
    adam_step(store, store.grads(), lr)
    return float(loss.data)


def random_crops(
    audio: Sequence[np.ndarray], batch: int, crop: int, hop: int, rng: np.random.Generator
) -> np.ndarray:
    """Equal-length training crops whose offsets sit on the latent frame grid.

    Clips shorter than ``crop`` are zero padded.  Grid-aligned offsets mean
    every crop is seen with the same framing the encoder uses on full clips.
    """
    out = np.zeros((batch, crop), dtype=np.float32)
    for b in range(batch):
        clip = np.asarray(audio[rng.integers(len(audio))], dtype=np.float32)
        slots = max(0, (len(clip) - crop) // hop)
        start = hop * int(rng.integers(slots + 1))
        piece = clip[start : start + crop]
        out[b, : len(piece)] = piece
    return out


def train_autoencoder(
    ae: Autoencoder,
    bank: PqmfBank,
    audio: Sequence[np.ndarray],
    steps: int,
    lr: float = 5e-3,
    batch: int = 8,
    crop: int = 16384,
    seed: int = 0,
    decay_at: float = 0.7,
    decay: float = 0.3,
    log_eps: float = 1.0,
    store: ParamStore | None = None,
    callback=None,
) -> list[float]:
    """Adam on random crops; the rate drops by ``decay`` after ``decay_at`` of the run.

    Returns the per-step training losses.
    """
    store = store or ParamStore.from_modules(ae=ae)
    rng = np.random.default_rng(seed)
    losses = []
    for step in range(steps):
        rate = lr if step < decay_at * steps else lr * decay
        crops = random_crops(audio, batch, crop, ae.frame_hop, rng)
        loss = ae_train_step(ae, store, bank, crops, rate, log_eps=log_eps)
        if not np.isfinite(loss):
            raise NumericError(f"autoencoder loss became {loss} at step {step}")
        losses.append(loss)
        if callback is not None:
            callback(step, loss)
    return losses


def fit_latent_stats(ae: Autoencoder, bank: PqmfBank, audio: Sequence[np.ndarray]) -> None:
    """Per-channel mean and std of the latents over a set of clips."""
    zs = [ae.encode(analysis_array(bank, np.asarray(a)).astype(np.float32)).values for a in audio]
    cat = np.concatenate(zs, axis=1)
    ae.latent_mean = cat.mean(axis=1).astype(np.float32)
    ae.latent_std = np.maximum(cat.std(axis=1), 1e-3).astype(np.float32)
