"""Synthetic tonal "speech" for overfitting checks and demos.

Each clip is a sequence of pinyin-like syllables.  A syllable is rendered
as a harmonic tone: the pitch contour follows the Mandarin tone shape and
the harmonic amplitudes follow formant bumps chosen by the phoneme.  Every
phoneme lasts a whole number of latent frames, so ground-truth durations
are exact by construction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dsp.signals import Waveform
from .dsp.wavio import write_wav

# (F1, F2, F3) in Hz
FORMANTS = {
    "a": (850, 1300, 2600),
    "i": (300, 2300, 3100),
    "u": (320, 800, 2300),
    "e": (500, 1500, 2500),
    "o": (550, 900, 2500),
    "ai": (700, 1800, 2700),
    "ao": (700, 1000, 2500),
    "an": (800, 1400, 2900),
    "b": (250, 900, 2200),
    "m": (280, 1200, 2600),
    "d": (300, 1700, 2700),
    "n": (300, 1600, 2800),
    "g": (350, 1900, 2300),
    "h": (600, 1700, 3300),
    "l": (380, 1200, 2800),
}
INITIALS = ("b", "m", "d", "n", "g", "h", "l")
FINALS = ("a", "i", "u", "e", "o", "ai", "ao", "an")
TONE_CONTOURS = {
    "1": lambda x: 1.25 + 0 * x,
    "2": lambda x: 0.95 + 0.35 * x,
    "3": lambda x: 1.0 - 0.8 * x * (1 - x) * 1.2 + 0.05 * x,
    "4": lambda x: 1.35 - 0.5 * x,
}


@dataclass
class ToyClip:
    id: str
    samples: np.ndarray
    phonemes: list[str]
    styles: list[str]
    durations: list[int]
    text: str


def render_phoneme(name: str, tone: str, n: int, sample_rate: int, f0: float, t0: float, phase: float):
    x = (np.arange(n) + t0) / max(n + t0, 1)
    pitch = f0 * TONE_CONTOURS[tone](x)
    inst_phase = phase + 2 * np.pi * np.cumsum(pitch) / sample_rate
    out = np.zeros(n)
    formants = FORMANTS[name]
    for h in range(1, 40):
        freq = h * pitch
        if freq.max() > 8000:
            break
        amp = sum(np.exp(-0.5 * ((freq - f) / 120.0) ** 2) * w for f, w in zip(formants, (1.0, 0.6, 0.3)))
        out += (amp + 0.02) / h**0.5 * np.sin(h * inst_phase)
    return out, inst_phase[-1]


def render_clip(syllables, frames, frame_hop: int, sample_rate: int, f0: float = 170.0) -> np.ndarray:
    """``syllables`` is a list of (initial or None, final, tone); ``frames`` the per-phoneme frame counts."""
    pieces = []
    phase = 0.0
    it = iter(frames)
    for initial, final, tone in syllables:
        parts = ([initial] if initial else []) + [final]
        counts = [next(it) for _ in parts]
        total = sum(counts) * frame_hop
        offset = 0
        syl = []
        for name, count in zip(parts, counts):
            n = count * frame_hop
            wave, phase = render_phoneme(name, tone, n, sample_rate, f0, offset, phase)
            syl.append(wave)
            offset += n
        syl = np.concatenate(syl)
        ramp = min(400, total // 4)
        env = np.ones(total)
        env[:ramp] = 0.5 - 0.5 * np.cos(np.pi * np.arange(ramp) / ramp)
        env[-ramp:] = env[:ramp][::-1]
        pieces.append(syl * env)
    audio = np.concatenate(pieces)
    return (0.95 * audio / np.abs(audio).max()).astype(np.float32)


def make_toy_corpus(
    n_clips: int = 10,
    frames_per_clip: int = 48,
    syllables_per_clip: int = 4,
    frame_hop: int = 1024,
    sample_rate: int = 48000,
    seed: int = 0,
) -> list[ToyClip]:
    """Distinct random syllable sequences, all ``frames_per_clip`` latent frames long."""
    rng = np.random.default_rng(seed)
    clips: list[ToyClip] = []
    seen = set()
    while len(clips) < n_clips:
        syllables = []
        for _ in range(syllables_per_clip):
            initial = INITIALS[rng.integers(len(INITIALS))] if rng.random() < 0.7 else None
            syllables.append((initial, FINALS[rng.integers(len(FINALS))], str(rng.integers(1, 5))))
        key = tuple(syllables)
        if key in seen:
            continue
        seen.add(key)
        phonemes, styles, frames = [], [], []
        budget = frames_per_clip
        for k, (initial, final, tone) in enumerate(syllables):
            left = syllables_per_clip - k
            share = budget // left if left > 1 else budget
            if initial:
                phonemes.append(initial)
                styles.append(tone)
                frames.append(2)
                share -= 2
                budget -= 2
            phonemes.append(final)
            styles.append(tone)
            frames.append(share)
            budget -= share
        samples = render_clip(syllables, frames, frame_hop, sample_rate)
        text = " ".join(f"{i or ''}{f}{t}" for i, f, t in syllables)
        clips.append(ToyClip(f"toy{len(clips):03d}", samples, phonemes, styles, frames, text))
    return clips


def write_toy_corpus(out_dir: str | Path, clips: list[ToyClip], sample_rate: int = 48000) -> Path:
    """Write WAVs plus a JSON-Lines manifest; returns the manifest path."""
    out = Path(out_dir)
    (out / "wavs").mkdir(parents=True, exist_ok=True)
    manifest = out / "manifest.jsonl"
    with open(manifest, "w") as fh:
        for clip in clips:
            wav_path = out / "wavs" / f"{clip.id}.wav"
            write_wav(wav_path, Waveform(clip.samples, sample_rate))
            entry = {
                "id": clip.id,
                "audio_path": str(wav_path.relative_to(out)),
                "phonemes": clip.phonemes,
                "styles": clip.styles,
                "durations": clip.durations,
                "text": clip.text,
            }
            fh.write(json.dumps(entry) + "\n")
    return manifest
