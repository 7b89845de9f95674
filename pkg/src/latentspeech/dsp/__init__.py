"""Filter banks, spectra and audio I/O."""

from .pqmf import DesignError, PqmfBank, design_pqmf, pqmf_analysis, pqmf_synthesis
from .signals import SubbandSignal, Waveform, peak_normalize, snr_db
from .spectral import (
    DEFAULT_SCALES,
    mel_filterbank,
    mel_spectrogram,
    multiscale_spectral_distance,
    spectral_distance_tensor,
    stft_magnitude,
)
from .wavio import read_wav, write_wav

__all__ = [
    "DEFAULT_SCALES", "DesignError", "PqmfBank", "SubbandSignal", "Waveform",
    "design_pqmf", "mel_filterbank", "mel_spectrogram", "multiscale_spectral_distance",
    "peak_normalize", "pqmf_analysis", "pqmf_synthesis", "read_wav", "snr_db",
    "spectral_distance_tensor", "stft_magnitude", "write_wav",
]
