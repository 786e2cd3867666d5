from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..gates import Backend, Bit, GateKind, SimBackend


class WidthError(ValueError):
    """Operands or values do not fit the configured word width."""


def check_width(width: int) -> None:
    if width < 4 or width > 64 or width & (width - 1):
        raise WidthError(f"word width must be a power of two in [4, 64], got {width}")


@dataclass(frozen=True)
class Word:
    """Fixed-width vector of encrypted bits, index 0 is the LSB."""

    backend: Backend
    bits: tuple[Bit, ...]

    @property
    def width(self) -> int:
        return len(self.bits)

    @property
    def msb(self) -> Bit:
        return self.bits[-1]

    def __getitem__(self, i):
        return self.bits[i]

    def __iter__(self):
        return iter(self.bits)

    def __len__(self) -> int:
        return len(self.bits)

    def slice(self, lo: int, hi: int) -> Word:
        return Word(self.backend, self.bits[lo:hi])


def make_word(be: Backend, bits: Iterable[Bit]) -> Word:
    return Word(be, tuple(bits))


def same_width(*words: Word) -> int:
    widths = {w.width for w in words}
    if len(widths) != 1:
        raise WidthError(f"operand widths differ: {sorted(widths)}")
    return widths.pop()


def encrypt_word(be: Backend, bits: Sequence[bool], width: int | None = None) -> Word:
    if width is not None and len(bits) != width:
        raise WidthError(f"expected {width} bits, got {len(bits)}")
    return Word(be, tuple(be.encrypt_bit(bool(b)) for b in bits))


def decrypt_word(w: Word) -> list[bool]:
    return [w.backend.decrypt_bit(b) for b in w.bits]


def int_to_bits(value: int, width: int) -> list[bool]:
    return [bool((value >> i) & 1) for i in range(width)]


def bits_to_int(bits: Sequence[bool]) -> int:
    return sum(1 << i for i, b in enumerate(bits) if b)


def encrypt_int(be: Backend, value: int, width: int) -> Word:
    if not -(1 << (width - 1)) <= value < (1 << width):
        raise WidthError(f"{value} does not fit in {width} bits")
    return encrypt_word(be, int_to_bits(value & ((1 << width) - 1), width))


def decrypt_int(w: Word, signed: bool = False) -> int:
    value = bits_to_int(decrypt_word(w))
    if signed and value >> (w.width - 1):
        value -= 1 << w.width
    return value


def const_word(be: Backend, value: int, width: int) -> Word:
    """Cleartext value encoded with CONSTANT gates (known to the evaluator)."""
    return Word(be, tuple(be.constant(bool((value >> i) & 1)) for i in range(width)))


def copy_word(w: Word) -> Word:
    be = w.backend
    return Word(be, tuple(be.eval_gate(GateKind.COPY, b) for b in w.bits))


# Lane-parallel helpers: lane k of every bit belongs to input vector k.


def _pack(column: np.ndarray) -> int:
    return int.from_bytes(np.packbits(column.astype(np.uint8), bitorder="little").tobytes(), "little")


def encrypt_lanes(be: SimBackend, values: Sequence[int], width: int) -> Word:
    arr = np.asarray(values, dtype=object)
    if len(arr) != be.lanes:
        raise WidthError(f"backend has {be.lanes} lanes, got {len(arr)} values")
    ints = np.array([int(v) & ((1 << width) - 1) for v in values], dtype=np.uint64)
    return Word(be, tuple(be.encrypt_lanes(_pack((ints >> np.uint64(i)) & np.uint64(1))) for i in range(width)))


def decrypt_lanes(w: Word, signed: bool = False) -> list[int]:
    be = w.backend
    n = be.lanes
    nbytes = (n + 7) // 8
    out = np.zeros(n, dtype=object)
    for i, bit in enumerate(w.bits):
        raw = np.frombuffer(be.lane_values(bit).to_bytes(nbytes, "little"), dtype=np.uint8)
        column = np.unpackbits(raw, bitorder="little")[:n].astype(object)
        out += column << i
    values = [int(v) for v in out]
    if signed:
        top = 1 << (w.width - 1)
        values = [v - (top << 1) if v & top else v for v in values]
    return values
