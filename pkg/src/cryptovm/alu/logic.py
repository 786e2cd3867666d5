"""Bitwise operations and data movement."""

from __future__ import annotations

from ..gates import GateKind
from .word import Word, WidthError, same_width

_BITWISE = {
    "AND": GateKind.AND,
    "OR": GateKind.OR,
    "XOR": GateKind.XOR,
    "ORN": GateKind.ORYN,  # a OR NOT b
}


def bitwise(kind: str, a: Word, b: Word) -> Word:
    same_width(a, b)
    gate = _BITWISE.get(kind.upper())
    if gate is None:
        raise ValueError(f"unknown bitwise operation {kind!r}")
    be = a.backend
    with be.stage(f"bitwise/{kind.lower()}"):
        return Word(be, tuple(be.eval_gate(gate, x, y) for x, y in zip(a.bits, b.bits)))


def not_word(a: Word) -> Word:
    be = a.backend
    with be.region("bitwise/not"):
        return Word(be, tuple(be.eval_gate(GateKind.NOT, x) for x in a.bits))


def _check_field(w: Word, lsb: int, width: int) -> None:
    if lsb < 0 or width < 0 or lsb + width > w.width:
        raise WidthError(f"bit field [{lsb}, {lsb + width}) outside a {w.width}-bit word")


def bfc(w: Word, lsb: int, width: int) -> Word:
    """Clear bits ``[lsb, lsb + width)``."""
    _check_field(w, lsb, width)
    be = w.backend
    with be.region("bfc"):
        out = [
            be.constant(False) if lsb <= i < lsb + width else be.eval_gate(GateKind.COPY, x)
            for i, x in enumerate(w.bits)
        ]
    return Word(be, tuple(out))


def bfi(dst: Word, src: Word, lsb: int, width: int) -> Word:
    """Insert the low ``width`` bits of ``src`` into ``dst`` at ``lsb``."""
    same_width(dst, src)
    _check_field(dst, lsb, width)
    be = dst.backend
    with be.region("bfi"):
        out = [
            be.eval_gate(GateKind.COPY, src.bits[i - lsb] if lsb <= i < lsb + width else x)
            for i, x in enumerate(dst.bits)
        ]
    return Word(be, tuple(out))


def rbit(w: Word) -> Word:
    be = w.backend
    with be.region("rbit"):
        return Word(be, tuple(be.eval_gate(GateKind.COPY, x) for x in reversed(w.bits)))


def rev(w: Word) -> Word:
    if w.width % 8:
        raise WidthError(f"byte reverse needs a multiple of 8 bits, got {w.width}")
    be = w.backend
    nbytes = w.width // 8
    with be.region("rev"):
        out = [
            be.eval_gate(GateKind.COPY, w.bits[(nbytes - 1 - i // 8) * 8 + i % 8])
            for i in range(w.width)
        ]
    return Word(be, tuple(out))
