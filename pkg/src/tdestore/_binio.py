"""Little-endian framing helpers shared by the on-disk formats."""

from __future__ import annotations

import os
import struct
from pathlib import Path


class Reader:
    """Cursor over a byte string; every short read raises ``error``."""

    def __init__(self, data: bytes, error: type[Exception], offset: int = 0):
        self.data = data
        self.pos = offset
        self.error = error

    def take(self, n: int) -> bytes:
        if n < 0 or self.pos + n > len(self.data):
            raise self.error(f"truncated input at offset {self.pos}")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u16(self) -> int:
        return struct.unpack("<H", self.take(2))[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def blob(self) -> bytes:
        return self.take(self.u32())

    def text(self) -> str:
        raw = self.take(self.u16())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise self.error("invalid utf-8 text field") from exc

    def at_end(self) -> bool:
        return self.pos == len(self.data)

    def records(self):
        """Yield ``(record_type, body)`` pairs until the input is exhausted."""
        while not self.at_end():
            rtype = self.u8()
            yield rtype, self.blob()


def u8(v: int) -> bytes:
    return struct.pack("<B", v)


def u16(v: int) -> bytes:
    return struct.pack("<H", v)


def u32(v: int) -> bytes:
    return struct.pack("<I", v)


def u64(v: int) -> bytes:
    return struct.pack("<Q", v)


def blob(data: bytes) -> bytes:
    return u32(len(data)) + data


def text(s: str) -> bytes:
    raw = s.encode("utf-8")
    if len(raw) > 0xFFFF:
        raise ValueError("text field too long")
    return u16(len(raw)) + raw


def record(rtype: int, body: bytes) -> bytes:
    return u8(rtype) + blob(body)


def atomic_write(path: Path, data: bytes) -> None:
    """Write ``data`` to ``path`` via a sibling temp file and rename."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(data)
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
