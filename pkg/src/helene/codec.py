"""Canonical length-prefixed encoding for transaction arguments and events.

A message is the concatenation of its fields, each prefixed with a 4-byte
big-endian length. Integers travel as 8-byte big-endian unsigned values.
The encoding is injective, so hashing encoded bytes is well-defined.
"""

from __future__ import annotations

import struct


class CodecError(ValueError):
    pass


def enc_u64(value: int) -> bytes:
    if not 0 <= value < 1 << 64:
        raise CodecError(f"u64 out of range: {value}")
    return struct.pack(">Q", value)


def dec_u64(data: bytes) -> int:
    if len(data) != 8:
        raise CodecError(f"u64 field must be 8 bytes, got {len(data)}")
    return struct.unpack(">Q", data)[0]


def enc_text(value: str) -> bytes:
    return value.encode("utf-8")


def dec_text(data: bytes) -> str:
    return data.decode("utf-8")


def encode_fields(*parts: bytes) -> bytes:
    out = bytearray()
    for part in parts:
        out += struct.pack(">I", len(part))
        out += part
    return bytes(out)


def decode_fields(data: bytes) -> list[bytes]:
    parts = []
    pos = 0
    while pos < len(data):
        if pos + 4 > len(data):
            raise CodecError("truncated length prefix")
        (size,) = struct.unpack(">I", data[pos : pos + 4])
        pos += 4
        if pos + size > len(data):
            raise CodecError("field overruns buffer")
        parts.append(data[pos : pos + size])
        pos += size
    return parts


def decode_exact(data: bytes, count: int) -> list[bytes]:
    parts = decode_fields(data)
    if len(parts) != count:
        raise CodecError(f"expected {count} fields, got {len(parts)}")
    return parts
