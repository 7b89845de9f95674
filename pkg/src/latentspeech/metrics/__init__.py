"""Evaluation metrics: mel cepstral distortion and token error rates."""

from .asr import FakeTranscriptionClient, HttpTranscriptionClient, transcribe, transcribe_batch
from .cepstral import CepstraSequence, dtw_path, mcd, mel_cepstra
from .text import (
    Transcript,
    edit_distance,
    edit_distance_rate,
    error_rates,
    join_syllables,
    split_syllables,
)

__all__ = [
    "CepstraSequence", "FakeTranscriptionClient", "HttpTranscriptionClient", "Transcript",
    "dtw_path", "edit_distance", "edit_distance_rate", "error_rates", "join_syllables",
    "mcd", "mel_cepstra", "split_syllables", "transcribe", "transcribe_batch",
]
