"""Small shared helpers: hashing, canonical JSON, atomic writes, tiny PNGs."""

from __future__ import annotations

import hashlib
import json
import os
import struct
import tempfile
import unicodedata
import zlib
from pathlib import Path


def text_digest(text: str) -> str:
    """SHA-256 of the NFC-normalized text, hex encoded."""
    return hashlib.sha256(unicodedata.normalize("NFC", text).encode("utf-8")).hexdigest()


def bytes_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def stable_key(*parts: object) -> str:
    """Deterministic hex digest of the joined string forms of the parts."""
    joined = "\x1f".join(str(p) for p in parts)
    return hashlib.sha256(joined.encode("utf-8")).hexdigest()


def unit_uniform(*parts: object) -> float:
    """Deterministic pseudo-uniform draw in [0, 1) keyed by the parts."""
    digest = hashlib.sha256(stable_key(*parts).encode("ascii")).digest()
    return int.from_bytes(digest[:8], "big") / 2**64


def derived_seed(*parts: object) -> int:
    """Deterministic 31-bit seed derived from the parts."""
    return int(stable_key(*parts)[:8], 16) % (2**31)


def canonical_json(obj: object) -> str:
    """Stable JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(obj, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: Path | str, text: str) -> None:
    """Write via a temp file in the same directory and rename over the target."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: Path | str, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def png_bytes(width: int, height: int, rgb: tuple[int, int, int]) -> bytes:
    """Minimal solid-color RGB PNG, deterministic byte-for-byte."""

    def chunk(tag: bytes, payload: bytes) -> bytes:
        return (
            struct.pack(">I", len(payload))
            + tag
            + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
        )

    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    row = b"\x00" + bytes(rgb) * width
    body = zlib.compress(row * height, level=9)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", header)
        + chunk(b"IDAT", body)
        + chunk(b"IEND", b"")
    )
