"""WAV reading and writing (16-bit PCM and 32-bit float, mono)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.io import wavfile

from ..errors import ConfigError, FormatError
from .signals import Waveform


def read_wav(path: str | Path, expected_rate: int | None = None) -> Waveform:
    """Load a WAV file as mono float samples; stereo is averaged.

    A file whose rate differs from ``expected_rate`` is rejected, no
    resampling is attempted.
    """
    try:
        rate, data = wavfile.read(str(path))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from exc
    if expected_rate is not None and rate != expected_rate:
        raise ConfigError(f"{path}: sample rate {rate} Hz, expected {expected_rate} Hz")
    if data.dtype == np.int16:
        samples = data.astype(np.float32) / 32768.0
    elif data.dtype == np.int32:
        samples = data.astype(np.float32) / 2147483648.0
    elif data.dtype in (np.float32, np.float64):
        samples = data.astype(np.float32)
    else:
        raise FormatError(f"{path}: unsupported sample format {data.dtype}")
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return Waveform(samples, rate)


def write_wav(path: str | Path, audio: Waveform, pcm16: bool = False) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    if pcm16:
        data = np.clip(np.round(audio.samples * 32767.0), -32768, 32767).astype(np.int16)
    else:
        data = audio.samples.astype(np.float32)
    wavfile.write(str(path), audio.sample_rate, data)
