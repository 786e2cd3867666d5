"""Binary data-memory file.

Layout: ``b"CEMU"``, a one-byte version, the word width as u16 LE, the word
count as u32 LE, then each word in ``ceil(width / 8)`` bytes, little endian
(bit 0 of the word is bit 0 of the first byte).
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Sequence

MAGIC = b"CEMU"
VERSION = 1
HEADER = struct.Struct("<4sBHI")


class MemFileError(ValueError):
    pass


class BadMagic(MemFileError):
    pass


class BadVersion(MemFileError):
    pass


class Truncated(MemFileError):
    pass


class ValueRangeError(ValueError):
    pass


def word_bytes(width: int) -> int:
    return (width + 7) // 8


def pack(width: int, values: Sequence[int]) -> bytes:
    if not 1 <= width <= 0xFFFF:
        raise ValueRangeError(f"unsupported word width {width}")
    nb = word_bytes(width)
    out = bytearray(HEADER.pack(MAGIC, VERSION, width, len(values)))
    for i, v in enumerate(values):
        if v < 0 or v >> width:
            raise ValueRangeError(f"word {i} = {v} does not fit in {width} bits")
        out += v.to_bytes(nb, "little")
    return bytes(out)


def read_header(data: bytes) -> tuple[int, int]:
    """Validate the header; returns ``(width, count)``."""
    if len(data) < HEADER.size:
        if not MAGIC.startswith(data[:4]):
            raise BadMagic("not a memory file (bad magic)")
        raise Truncated(f"header needs {HEADER.size} bytes, file has {len(data)}")
    magic, version, width, count = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagic("not a memory file (bad magic)")
    if version != VERSION:
        raise BadVersion(f"unsupported memory file version {version}")
    if width == 0:
        raise MemFileError("word width of 0")
    return width, count


def unpack(data: bytes) -> tuple[int, list[int]]:
    width, count = read_header(data)
    nb = word_bytes(width)
    need = HEADER.size + nb * count
    if len(data) < need:
        raise Truncated(f"expected {count} words ({need} bytes), file has {len(data)} bytes")
    mask = (1 << width) - 1
    body = data[HEADER.size : need]
    return width, [int.from_bytes(body[i * nb : (i + 1) * nb], "little") & mask for i in range(count)]


def write(path: str | Path, width: int, values: Sequence[int]) -> None:
    Path(path).write_bytes(pack(width, values))


def read(path: str | Path) -> tuple[int, list[int]]:
    return unpack(Path(path).read_bytes())
