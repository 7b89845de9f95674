from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, InputError


@dataclass
class Waveform:
    """Mono audio samples (nominally in [-1, 1]) with their sample rate."""

    samples: np.ndarray
    sample_rate: int = 48000

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float32).reshape(-1)
        if self.sample_rate <= 0:
            raise ConfigError(f"sample rate must be positive, got {self.sample_rate}")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate


@dataclass
class SubbandSignal:
    """``[n_bands, L_sub]`` critically sampled band decomposition.

    ``length`` remembers the original audio length so synthesis can trim
    the zero padding added before analysis.
    """

    bands: np.ndarray
    sample_rate: int = 48000
    length: int | None = None

    @property
    def n_bands(self) -> int:
        return self.bands.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.bands.shape


def as_samples(audio) -> np.ndarray:
    samples = audio.samples if isinstance(audio, Waveform) else np.asarray(audio)
    if samples.size == 0:
        raise InputError("audio is empty")
    return samples


def peak_normalize(samples: np.ndarray, peak: float = 0.95) -> np.ndarray:
    top = np.max(np.abs(samples)) if samples.size else 0.0
    if top == 0:
        return samples.astype(np.float32)
    return (samples * (peak / top)).astype(np.float32)


def snr_db(reference: np.ndarray, estimate: np.ndarray) -> float:
    reference = np.asarray(reference, dtype=np.float64)
    noise = reference - np.asarray(estimate, dtype=np.float64)
    err = np.sum(noise**2)
    if err == 0:
        return float("inf")
    return float(10 * np.log10(np.sum(reference**2) / err))
