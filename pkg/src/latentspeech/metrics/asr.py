"""Transcription clients: an HTTP client for an external ASR service and a file-backed fake."""

from __future__ import annotations

import io
import json
import logging
import os
import time
import urllib.error
import urllib.request
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Mapping, Protocol, Sequence

import numpy as np
from scipy.io import wavfile

from ..dsp.signals import Waveform
from ..errors import ConfigError, TransportError
from .text import Transcript

log = logging.getLogger(__name__)


class TranscriptionClient(Protocol):
    def transcribe_text(self, audio: Waveform, clip_id: str | None = None) -> str: ...


def wav_bytes(audio: Waveform) -> bytes:
    buf = io.BytesIO()
    pcm = np.clip(np.round(audio.samples * 32767), -32768, 32767).astype(np.int16)
    wavfile.write(buf, audio.sample_rate, pcm)
    return buf.getvalue()


class HttpTranscriptionClient:
    """POSTs WAV bytes and reads a UTF-8 text body.

    ``attempts`` counts every request, so the default gives up after the
    third failure; waits between attempts double from ``backoff`` seconds.
    """

    def __init__(
        self,
        url: str | None = None,
        token: str | None = None,
        timeout: float = 30.0,
        attempts: int = 3,
        backoff: float = 0.5,
        sleep=time.sleep,
    ):
        self.url = url or os.environ.get("LS_ASR_URL")
        if not self.url:
            raise ConfigError("no ASR endpoint: pass url or set LS_ASR_URL")
        self.token = token if token is not None else os.environ.get("LS_ASR_TOKEN")
        self.timeout = timeout
        self.attempts = attempts
        self.backoff = backoff
        self._sleep = sleep

    def transcribe_text(self, audio: Waveform, clip_id: str | None = None) -> str:
        headers = {"Content-Type": "audio/wav"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        body = wav_bytes(audio)
        last = None
        for attempt in range(1, self.attempts + 1):
            req = urllib.request.Request(self.url, data=body, headers=headers, method="POST")
            try:
                with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                    return resp.read().decode("utf-8")
            except (urllib.error.URLError, TimeoutError, ConnectionError) as exc:
                last = exc
                log.warning("ASR attempt %d/%d failed: %s", attempt, self.attempts, exc)
                if attempt < self.attempts:
                    self._sleep(self.backoff * 2 ** (attempt - 1))
        raise TransportError(f"ASR request failed after {self.attempts} attempts: {last}", self.attempts)


class FakeTranscriptionClient:
    """Returns fixed text per clip id, read from a JSON object file or a mapping."""

    def __init__(self, source: str | Path | Mapping[str, str]):
        if isinstance(source, Mapping):
            self.table = dict(source)
        else:
            self.table = json.loads(Path(source).read_text(encoding="utf-8"))

    def transcribe_text(self, audio: Waveform, clip_id: str | None = None) -> str:
        return self.table.get(clip_id, "")


def transcribe(client: TranscriptionClient, audio: Waveform, clip_id: str | None = None) -> Transcript:
    transcript = Transcript.from_text(client.transcribe_text(audio, clip_id), strict=False)
    if transcript.empty:
        log.warning("empty transcript for %s", clip_id)
    if transcript.skipped:
        log.warning("unparseable syllables for %s: %s", clip_id, " ".join(transcript.skipped))
    return transcript


def transcribe_batch(
    client: TranscriptionClient,
    items: Sequence[tuple[str, Waveform]],
    workers: int = 4,
) -> list[Transcript]:
    """Transcribe ``(clip_id, audio)`` pairs concurrently; results keep input order."""
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        return list(pool.map(lambda item: transcribe(client, item[1], item[0]), items))
