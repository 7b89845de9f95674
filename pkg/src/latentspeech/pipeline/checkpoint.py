"""LSPK checkpoint files.

Layout: ``b"LSPK"``, a little-endian u32 format version, a u64 header
length, the UTF-8 JSON header, then the payload of little-endian float32
tensors.  The header holds the config snapshot, the noise schedule and a
tensor index ``name -> {dtype, shape, offset, nbytes}`` with offsets
relative to the payload start.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import FormatError

MAGIC = b"LSPK"
VERSION = 1
_PREFIX = struct.Struct("<4sIQ")


def save_checkpoint(path: str | Path, tensors: Mapping[str, np.ndarray], config: dict | None = None, schedule: dict | None = None) -> None:
    index = {}
    chunks = []
    offset = 0
    for name in sorted(tensors):
        arr = np.asarray(tensors[name], dtype="<f4", order="C")  # keeps 0-d shapes
        index[name] = {"dtype": "float32", "shape": list(arr.shape), "offset": offset, "nbytes": arr.nbytes}
        chunks.append(arr.tobytes())
        offset += arr.nbytes
    header = json.dumps({"config": config, "schedule": schedule, "tensors": index}, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_PREFIX.pack(MAGIC, VERSION, len(header)))
        fh.write(header)
        for c in chunks:
            fh.write(c)


def load_checkpoint(path: str | Path) -> tuple[dict[str, np.ndarray], dict | None, dict | None]:
    """Returns ``(tensors, config, schedule)``."""
    blob = Path(path).read_bytes()
    if len(blob) < _PREFIX.size:
        raise FormatError(f"{path}: file too short for a checkpoint")
    magic, version, hlen = _PREFIX.unpack_from(blob)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: format version {version}, this build reads version {VERSION}")
    start = _PREFIX.size + hlen
    if start > len(blob):
        raise FormatError(f"{path}: header runs past the end of the file")
    try:
        header = json.loads(blob[_PREFIX.size : start].decode("utf-8"))
        index = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: unreadable header ({exc})") from None
    payload = memoryview(blob)[start:]
    tensors = {}
    spans = []
    for name, meta in index.items():
        try:
            shape, off, nbytes = tuple(meta["shape"]), int(meta["offset"]), int(meta["nbytes"])
            if meta["dtype"] != "float32":
                raise FormatError(f"{path}: tensor {name!r} has unsupported dtype {meta['dtype']!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{path}: bad index entry for {name!r} ({exc})") from None
        if nbytes != 4 * int(np.prod(shape, dtype=np.int64)) or off < 0 or off + nbytes > len(payload):
            raise FormatError(f"{path}: tensor {name!r} lies outside the payload (truncated file?)")
        spans.append((off, off + nbytes, name))
        tensors[name] = np.frombuffer(payload[off : off + nbytes], dtype="<f4").reshape(shape).astype(np.float32)
    spans.sort()
    for (a0, a1, an), (b0, b1, bn) in zip(spans, spans[1:]):
        if b0 < a1:
            raise FormatError(f"{path}: tensors {an!r} and {bn!r} overlap")
    return tensors, header.get("config"), header.get("schedule")
