"""Short-time spectra, mel features and the multiscale spectral distance."""

from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np

from ..core.tensor import Tensor, as_tensor, log, mean, no_grad, sqrt, tabs, tsum
from ..errors import ConfigError, DimensionError, InputError
from .signals import SubbandSignal, Waveform, as_samples

DEFAULT_SCALES = (2048, 1024, 512, 256, 128)
LOG_FLOOR = 1e-5


@lru_cache(maxsize=16)
def hann(win_len: int) -> np.ndarray:
    return np.hanning(win_len + 1)[:-1]  # periodic


def _check_stft_args(win_len: int, hop: int) -> None:
    if win_len < 2 or win_len & (win_len - 1):
        raise ConfigError(f"window length must be a power of two, got {win_len}")
    if not 1 <= hop <= win_len:
        raise ConfigError(f"hop must lie in [1, {win_len}], got {hop}")


def _frames(x: np.ndarray, win_len: int, hop: int) -> np.ndarray:
    return np.lib.stride_tricks.sliding_window_view(x, win_len, axis=-1)[..., ::hop, :]


def stft_magnitude(audio, win_len: int = 1024, hop: int = 256) -> np.ndarray:
    """Hann-windowed STFT magnitude, ``[win_len // 2 + 1, frames]``.

    Frames start at sample 0 and are not centred, so the frame count is
    ``1 + (L - win_len) // hop``.
    """
    _check_stft_args(win_len, hop)
    x = np.asarray(as_samples(audio), dtype=np.float64)
    if x.shape[-1] < win_len:
        raise InputError(f"audio has {x.shape[-1]} samples, shorter than the {win_len}-sample window")
    spec = np.fft.rfft(_frames(x, win_len, hop) * hann(win_len), axis=-1)
    return np.swapaxes(np.abs(spec), -1, -2)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


@lru_cache(maxsize=16)
def mel_filterbank(sample_rate: int, win_len: int, n_mels: int, fmin: float = 0.0, fmax: float | None = None) -> np.ndarray:
    """Triangular filters on the HTK mel scale, ``[n_mels, win_len // 2 + 1]``, unit peak."""
    fmax = sample_rate / 2 if fmax is None else fmax
    edges = mel_to_hz(np.linspace(hz_to_mel(fmin), hz_to_mel(fmax), n_mels + 2))
    freqs = np.arange(win_len // 2 + 1) * sample_rate / win_len
    lo, centre, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs - lo) / (centre - lo)
    falling = (hi - freqs) / (hi - centre)
    fb = np.maximum(0.0, np.minimum(rising, falling))
    fb.setflags(write=False)
    return fb


def mel_spectrogram(audio, win_len: int = 1024, hop: int = 256, n_mels: int = 80, sample_rate: int | None = None) -> np.ndarray:
    """Log mel magnitudes ``log(1e-5 + M |STFT|)``, shape ``[n_mels, frames]``."""
    if sample_rate is None:
        sample_rate = audio.sample_rate if isinstance(audio, Waveform) else 48000
    mag = stft_magnitude(audio, win_len, hop)
    return np.log(LOG_FLOOR + mel_filterbank(sample_rate, win_len, n_mels) @ mag)


# differentiable pieces ------------------------------------------------------------


def stft_magnitude_tensor(x: Tensor, win_len: int, hop: int) -> Tensor:
    """Differentiable STFT magnitude of ``[..., L]``, returns ``[..., frames, bins]``.

    The signal is zero padded by ``win_len // 2`` on both sides (so any
    non-empty input yields at least one frame).
    """
    _check_stft_args(win_len, hop)
    x = as_tensor(x)
    length = x.shape[-1]
    half = win_len // 2
    lead = x.shape[:-1]
    padded = np.zeros(lead + (length + 2 * half,), dtype=x.data.dtype)
    padded[..., half : half + length] = x.data
    n_frames = 1 + (padded.shape[-1] - win_len) // hop
    window = hann(win_len).astype(x.data.dtype)
    spec = np.fft.rfft(_frames(padded, win_len, hop) * window, axis=-1)
    mag = np.sqrt(spec.real**2 + spec.imag**2 + 1e-12)

    def backward(g):
        # d|X|/dx through the real DFT: x_n += Re(sum_k G_k e^{+i 2 pi k n / N})
        gc = g * spec / mag
        gc[..., 1:-1] *= 0.5
        gframes = np.fft.irfft(gc, n=win_len, axis=-1) * win_len * window
        gpad = np.zeros(padded.shape, dtype=np.float64)
        if win_len % hop == 0:
            span = n_frames * hop
            for j in range(win_len // hop):
                chunk = gframes[..., :, j * hop : (j + 1) * hop]
                gpad[..., j * hop : j * hop + span] += chunk.reshape(lead + (span,))
        else:
            for f in range(n_frames):
                gpad[..., f * hop : f * hop + win_len] += gframes[..., f, :]
        return (gpad[..., half : half + length].astype(x.data.dtype),)

    return Tensor.from_op(mag.astype(x.data.dtype), (x,), backward, "stft_magnitude")


def spectral_distance_tensor(
    target: np.ndarray | Tensor,
    estimate: Tensor,
    scales: Sequence[int] = DEFAULT_SCALES,
    log_eps: float = 1.0,
) -> Tensor:
    """Multiscale spectral distance between ``[..., n_bands, L]`` signals.

    Per scale: ``||X - Y||_F / (||X||_F + ||Y||_F)`` plus the mean absolute
    difference of ``log(eps + |.|)``, where the norms and the mean run over
    every band and frame.  Windows overlap by 75%.  Scales are summed.
    """
    target, estimate = as_tensor(target), as_tensor(estimate)
    if target.shape != estimate.shape:
        raise DimensionError(f"shape mismatch: {target.shape} vs {estimate.shape}")
    total = None
    for win in scales:
        hop = win // 4
        X = stft_magnitude_tensor(target, win, hop)
        Y = stft_magnitude_tensor(estimate, win, hop)
        diff = X - Y
        num = sqrt(tsum(diff * diff) + 1e-20)
        den = sqrt(tsum(X * X) + 1e-20) + sqrt(tsum(Y * Y) + 1e-20)
        term = num / den + mean(tabs(log(X + log_eps) - log(Y + log_eps)))
        total = term if total is None else total + term
    return total


def multiscale_spectral_distance(
    x, y, scales: Sequence[int] = DEFAULT_SCALES, log_eps: float = 1.0
) -> float:
    xa = x.bands if isinstance(x, SubbandSignal) else np.asarray(x)
    ya = y.bands if isinstance(y, SubbandSignal) else np.asarray(y)
    if xa.shape != ya.shape:
        raise DimensionError(f"shape mismatch: {xa.shape} vs {ya.shape}")
    if np.array_equal(xa, ya):
        return 0.0
    with no_grad():
        return float(spectral_distance_tensor(Tensor(xa), Tensor(ya), scales, log_eps).data)
