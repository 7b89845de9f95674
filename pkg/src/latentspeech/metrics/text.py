"""Token error rates and tone-numbered pinyin segmentation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import InputError

PINYIN_INITIALS = (
    "zh", "ch", "sh", "b", "p", "m", "f", "d", "t", "n", "l", "g", "k", "h",
    "j", "q", "x", "r", "z", "c", "s", "y", "w",
)


def edit_distance(ref: Sequence, hyp: Sequence) -> int:
    """Levenshtein distance with unit substitution, insertion and deletion costs."""
    prev = np.arange(len(hyp) + 1)
    for i, r in enumerate(ref, 1):
        cur = np.empty_like(prev)
        cur[0] = i
        for j, h in enumerate(hyp, 1):
            cur[j] = min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (r != h))
        prev = cur
    return int(prev[-1])


def edit_distance_rate(ref: Sequence, hyp: Sequence) -> float:
    if len(ref) == 0:
        raise InputError("reference token list is empty")
    return edit_distance(list(ref), list(hyp)) / len(ref)


def split_syllable(syllable: str, position: int = 0) -> tuple[list[str], str]:
    """``"zhang1"`` -> (["zh", "ang"], "1")."""
    s = syllable.strip().lower()
    if len(s) < 2 or s[-1] not in "12345" or not s[:-1].isalpha():
        raise InputError(f"cannot parse syllable {syllable!r} at position {position}")
    body, tone = s[:-1], s[-1]
    for ini in PINYIN_INITIALS:
        if body.startswith(ini) and len(body) > len(ini):
            return [ini, body[len(ini) :]], tone
    return [body], tone


def split_syllables(text: str) -> tuple[list[str], list[str]]:
    """Split tone-numbered pinyin into phonemes (initial + final) and one tone per syllable."""
    phonemes, styles = [], []
    for k, syl in enumerate(text.split()):
        ph, tone = split_syllable(syl, k)
        phonemes.extend(ph)
        styles.append(tone)
    return phonemes, styles


def join_syllables(phonemes: Sequence[str], styles: Sequence[str]) -> str:
    """Inverse of :func:`split_syllables`."""
    out, k = [], 0
    it = iter(phonemes)
    for ph in it:
        syl = ph
        if ph in PINYIN_INITIALS:
            syl += next(it, "")
        if k >= len(styles):
            raise InputError("fewer tones than syllables")
        out.append(syl + styles[k])
        k += 1
    if k != len(styles):
        raise InputError("more tones than syllables")
    return " ".join(out)


@dataclass
class Transcript:
    text: str
    words: list[str] = field(default_factory=list)
    phonemes: list[str] = field(default_factory=list)
    styles: list[str] = field(default_factory=list)
    empty: bool = False
    skipped: list[str] = field(default_factory=list)

    @classmethod
    def from_text(cls, text: str, strict: bool = True) -> "Transcript":
        """Parse tone-numbered pinyin.

        With ``strict=False`` (used for recognizer output) syllables that do
        not parse are kept as words but add no phonemes or tones, so they
        surface as errors in WER-P and WER-S instead of aborting the run.
        """
        text = (text or "").strip()
        if not text:
            return cls("", empty=True)
        if strict:
            phonemes, styles = split_syllables(text)
            return cls(text, text.lower().split(), phonemes, styles)
        phonemes, styles, skipped = [], [], []
        for syl in text.split():
            try:
                ph, st = split_syllables(syl)
            except InputError:
                skipped.append(syl)
                continue
            phonemes += ph
            styles += st
        return cls(text, text.lower().split(), phonemes, styles, skipped=skipped)


def error_rates(reference: Transcript, hypothesis: Transcript) -> dict[str, float]:
    """Syllable-level WER plus phoneme (WER-P) and tone (WER-S) rates."""
    return {
        "wer": edit_distance_rate(reference.words, hypothesis.words),
        "wer_p": edit_distance_rate(reference.phonemes, hypothesis.phonemes),
        "wer_s": edit_distance_rate(reference.styles, hypothesis.styles),
    }
