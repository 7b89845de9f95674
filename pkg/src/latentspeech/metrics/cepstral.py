"""Mel cepstra and mel cepstral distortion with DTW alignment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from ..dsp.signals import Waveform, as_samples
from ..dsp.spectral import mel_spectrogram
from ..errors import InputError

MCD_SCALE = 10.0 / np.log(10.0)


@dataclass
class CepstraSequence:
    frames: np.ndarray  # [frames, 13], c_1 .. c_13

    def __post_init__(self):
        self.frames = np.atleast_2d(np.asarray(self.frames, dtype=np.float64))
        if self.frames.shape[0] == 0:
            raise InputError("cepstra sequence has no frames")
        if not np.isfinite(self.frames).all():
            raise InputError("cepstra contain non-finite values")

    def __len__(self) -> int:
        return self.frames.shape[0]


def mel_cepstra(audio, n_coeffs: int = 13, win_len: int = 1024, hop: int = 256, n_mels: int = 80) -> CepstraSequence:
    """Orthonormal DCT-II of log mel energies, keeping ``c_1 .. c_n``."""
    rate = audio.sample_rate if isinstance(audio, Waveform) else 48000
    mel = mel_spectrogram(Waveform(as_samples(audio), rate), win_len, hop, n_mels)
    cep = dct(mel, type=2, norm="ortho", axis=0)
    return CepstraSequence(cep[1 : n_coeffs + 1].T)


def dtw_path(cost: np.ndarray) -> list[tuple[int, int]]:
    """Minimum-cost monotone alignment with unit steps (1,0), (0,1), (1,1)."""
    n, m = cost.shape
    acc = np.full((n + 1, m + 1), np.inf)
    acc[0, 0] = 0.0
    for i in range(1, n + 1):
        prev = acc[i - 1]
        c = cost[i - 1]
        best = np.minimum(prev[1:], prev[:-1]) + c  # diagonal or vertical entry
        # horizontal runs: row[j] = min_k (best[k] + c[k+1] + ... + c[j]), a prefix-sum cummin
        csum = np.cumsum(c)
        acc[i, 1:] = csum + np.minimum.accumulate(best - csum)
    i, j = n, m
    path = [(i - 1, j - 1)]
    while (i, j) != (1, 1):
        moves = ((i - 1, j - 1), (i - 1, j), (i, j - 1))
        i, j = min(moves, key=lambda p: acc[p] if p[0] >= 1 and p[1] >= 1 else np.inf)
        path.append((i - 1, j - 1))
    return path[::-1]


def mcd(ref: CepstraSequence, syn: CepstraSequence, align: bool = True) -> float:
    """Mel cepstral distortion in dB.

    With ``align`` the frames are paired by DTW over Euclidean distances,
    otherwise frame by frame over the common length.
    """
    a = ref.frames if isinstance(ref, CepstraSequence) else CepstraSequence(ref).frames
    b = syn.frames if isinstance(syn, CepstraSequence) else CepstraSequence(syn).frames
    if a.shape[1] != b.shape[1]:
        raise InputError(f"coefficient counts differ: {a.shape[1]} vs {b.shape[1]}")
    if align:
        dist = np.sqrt(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1))
        ia, ib = np.array(dtw_path(dist)).T
        diff = a[ia] - b[ib]
    else:
        n = min(len(a), len(b))
        diff = a[:n] - b[:n]
    return float(MCD_SCALE * np.mean(np.sqrt(2.0 * np.sum(diff**2, axis=1))))
