"""Pseudo-QMF cosine-modulated filter bank.

The prototype is a Kaiser-windowed sinc whose cutoff is tuned so that the
prototype convolved with its time reverse is close to a Nyquist(2N)
filter, which is what makes the modulated bank nearly perfect-reconstructing.

Filtering is circular over the zero-padded signal.  The synthesis operator
is the exact adjoint (transpose) of analysis: this cancels the ``taps - 1``
sample group delay of the analysis/synthesis cascade and keeps the
reconstruction accurate up to the signal edges.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import optimize, signal

from ..errors import ConfigError, InputError
from .signals import SubbandSignal, Waveform, as_samples


class DesignError(ConfigError):
    pass


@dataclass(frozen=True)
class PqmfBank:
    n_bands: int
    prototype: np.ndarray
    analysis: np.ndarray  # [n_bands, taps]
    synthesis: np.ndarray  # [n_bands, taps]; time-reversed analysis filters
    cutoff: float

    @property
    def taps(self) -> int:
        return self.analysis.shape[1]


def kaiser_taps(n_bands: int, attenuation_db: float) -> int:
    """Kaiser length estimate for a transition band of pi / (2 n_bands), rounded up to a multiple of n_bands."""
    numtaps, _ = signal.kaiserord(attenuation_db, 1.0 / (2 * n_bands))
    return int(np.ceil(numtaps / n_bands) * n_bands)


def _prototype(n_bands: int, taps: int, beta: float, cutoff: float) -> np.ndarray:
    n = np.arange(taps) - (taps - 1) / 2
    return cutoff / np.pi * np.sinc(cutoff / np.pi * n) * signal.windows.kaiser(taps, beta)


def _nyquist_residual(h: np.ndarray, n_bands: int) -> float:
    g = np.convolve(h, h[::-1])
    centre = len(g) // 2
    idx = np.arange(centre % (2 * n_bands), len(g), 2 * n_bands)
    idx = idx[idx != centre]
    return float(np.sum(g[idx] ** 2) / g[centre] ** 2)


@lru_cache(maxsize=8)
def design_pqmf(n_bands: int = 16, attenuation_db: float = 100.0, taps: int | None = None) -> PqmfBank:
    if n_bands < 1 or n_bands & (n_bands - 1):
        raise ConfigError(f"n_bands must be a power of two, got {n_bands}")
    if n_bands == 1:
        one = np.ones((1, 1))
        return PqmfBank(1, np.ones(1), one, one, np.pi)
    needed = kaiser_taps(n_bands, attenuation_db)
    if taps is None:
        taps = needed
    if taps % n_bands:
        raise DesignError(f"taps ({taps}) must be a multiple of n_bands ({n_bands})")
    if taps < needed:
        raise DesignError(
            f"{taps} taps cannot reach {attenuation_db} dB with {n_bands} bands; need at least {needed}"
        )
    beta = signal.kaiser_beta(attenuation_db)
    nominal = np.pi / (2 * n_bands)
    res = optimize.minimize_scalar(
        lambda wc: _nyquist_residual(_prototype(n_bands, taps, beta, wc), n_bands),
        bounds=(0.5 * nominal, 1.5 * nominal),
        method="bounded",
        options={"xatol": 1e-12},
    )
    h = _prototype(n_bands, taps, beta, res.x)

    n = np.arange(taps) - (taps - 1) / 2
    k = np.arange(n_bands)[:, None]
    phase = (-1.0) ** k * np.pi / 4
    arg = (2 * k + 1) * np.pi / (2 * n_bands) * n
    analysis = 2 * h * np.cos(arg + phase)
    # unit energy per band makes the critically sampled bank near-orthogonal
    analysis /= np.sqrt(np.mean(np.sum(analysis**2, axis=1)))
    synthesis = analysis[:, ::-1].copy()
    for arr in (h, analysis, synthesis):
        arr.setflags(write=False)
    return PqmfBank(n_bands, h, analysis, synthesis, float(res.x))


def _padded_length(length: int, n_bands: int) -> int:
    return int(np.ceil(length / n_bands) * n_bands)


def analysis_array(bank: PqmfBank, x: np.ndarray) -> np.ndarray:
    """``[..., L]`` audio -> ``[..., n_bands, ceil(L / n_bands)]`` subbands."""
    x = np.asarray(x, dtype=np.float64)
    n, taps = bank.n_bands, bank.taps
    length = x.shape[-1]
    if length == 0:
        raise InputError("audio is empty")
    lp = _padded_length(length, n)
    if lp != length:
        x = np.concatenate([x, np.zeros(x.shape[:-1] + (lp - length,))], axis=-1)
    ext = x[..., np.arange(-(taps - 1), lp) % lp]
    windows = np.lib.stride_tricks.sliding_window_view(ext, taps, axis=-1)[..., ::n, :]
    v = windows @ bank.synthesis.T  # synthesis = reversed analysis
    return np.swapaxes(v, -1, -2)


def synthesis_array(bank: PqmfBank, bands: np.ndarray, length: int | None = None) -> np.ndarray:
    """Adjoint of :func:`analysis_array`; optionally trimmed to ``length``."""
    bands = np.asarray(bands, dtype=np.float64)
    n, taps = bank.n_bands, bank.taps
    if bands.shape[-2] != n:
        raise ConfigError(f"bank has {n} bands but the signal has {bands.shape[-2]}")
    l_sub = bands.shape[-1]
    lp = l_sub * n
    lead = bands.shape[:-2]
    blocks = np.swapaxes(bands, -1, -2) @ bank.synthesis  # [..., L_sub, taps]
    blocks = blocks.reshape(lead + (l_sub, taps // n, n))
    ext = np.zeros(lead + (lp + taps - 1,))
    for p in range(taps // n):
        ext[..., p * n : p * n + lp] += blocks[..., :, p, :].reshape(lead + (lp,))
    # fold the linear result back onto the circle, undoing the taps-1 delay
    reps = int(np.ceil((lp + 2 * (taps - 1)) / lp))
    circ = np.zeros(lead + (reps * lp,))
    body = ext[..., taps - 1 :]
    circ[..., : body.shape[-1]] += body
    circ[..., reps * lp - (taps - 1) :] += ext[..., : taps - 1]
    y = circ.reshape(lead + (reps, lp)).sum(axis=-2)
    return y if length is None else y[..., :length]


def pqmf_analysis(bank: PqmfBank, audio) -> SubbandSignal:
    samples = as_samples(audio)
    rate = audio.sample_rate if isinstance(audio, Waveform) else 48000
    bands = analysis_array(bank, samples).astype(np.float32)
    return SubbandSignal(bands, rate, len(samples))


def pqmf_synthesis(bank: PqmfBank, sub: SubbandSignal) -> Waveform:
    y = synthesis_array(bank, sub.bands, sub.length)
    return Waveform(y.astype(np.float32), sub.sample_rate)
