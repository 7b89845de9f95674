"""JSON-Lines dataset manifests."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from ..errors import InputError


@dataclass
class ManifestEntry:
    id: str
    audio_path: str
    phonemes: list[str]
    styles: list[str]
    durations: list[int] | None = None
    text: str | None = None

    def validate(self) -> "ManifestEntry":
        if not isinstance(self.id, str) or not self.id:
            raise InputError("entry id must be a non-empty string")
        if len(self.phonemes) != len(self.styles):
            raise InputError(f"entry {self.id!r}: {len(self.phonemes)} phonemes but {len(self.styles)} styles")
        if self.durations is not None:
            if len(self.durations) != len(self.phonemes):
                raise InputError(f"entry {self.id!r}: {len(self.durations)} durations for {len(self.phonemes)} phonemes")
            if any(not isinstance(d, int) or isinstance(d, bool) or d < 0 for d in self.durations):
                raise InputError(f"entry {self.id!r}: durations must be non-negative integers")
        return self

    def resolve_audio(self, root: str | Path) -> Path:
        p = Path(self.audio_path)
        return p if p.is_absolute() else Path(root) / p


def load_manifest(path: str | Path) -> list[ManifestEntry]:
    entries: list[ManifestEntry] = []
    seen: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(raw, dict):
                raise InputError(f"{path}:{lineno}: entry must be a JSON object")
            try:
                entry = ManifestEntry(**raw)
            except TypeError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            try:
                entry.validate()
            except InputError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
            if entry.id in seen:
                raise InputError(f"{path}:{lineno}: duplicate id {entry.id!r} (first on line {seen[entry.id]})")
            seen[entry.id] = lineno
            entries.append(entry)
    return entries


def write_manifest(path: str | Path, entries) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            row = asdict(e) if isinstance(e, ManifestEntry) else dict(e)
            fh.write(json.dumps({k: v for k, v in row.items() if v is not None}) + "\n")
