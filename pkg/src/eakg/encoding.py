"""Byte-level helpers shared by transcripts, params hashing and signatures."""

from __future__ import annotations

import hashlib


def len4(item: bytes) -> bytes:
    """Length-prefix ``item`` with a 4-byte big-endian length."""
    return len(item).to_bytes(4, "big") + item


def int_to_fixed(value: int, width: int) -> bytes:
    return value.to_bytes(width, "big")


def int_to_min(value: int) -> bytes:
    """Minimal big-endian encoding; zero encodes as a single 0x00 byte."""
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def byte_width(bits: int) -> int:
    return (bits + 7) // 8


def hex_fixed(value: int, width: int) -> str:
    return format(value, "0{}x".format(2 * width))


def parse_hex_int(text: str) -> int:
    if not isinstance(text, str) or not text:
        raise ValueError("expected a hex string")
    return int(text, 16)


def expand(seed: bytes, nbytes: int, label: bytes = b"") -> bytes:
    """SHA-256 in counter mode: ``H(label || seed || ctr)`` blocks, truncated."""
    out = bytearray()
    ctr = 0
    while len(out) < nbytes:
        out += hashlib.sha256(label + seed + ctr.to_bytes(4, "big")).digest()
        ctr += 1
    return bytes(out[:nbytes])
