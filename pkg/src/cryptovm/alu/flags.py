from __future__ import annotations

from dataclasses import dataclass

from ..gates import Bit, GateKind
from .word import Word


@dataclass(frozen=True)
class Flags:
    n: Bit
    z: Bit
    c: Bit
    v: Bit

    def bits(self) -> tuple[Bit, Bit, Bit, Bit]:
        return (self.n, self.z, self.c, self.v)


def or_reduce(w: Word) -> Bit:
    """Balanced OR tree, ceil(log2 N) levels, one stage per level."""
    be = w.backend
    layer = list(w.bits)
    level = 1
    while len(layer) > 1:
        with be.stage(f"level{level}"):
            layer = _or_level(be, layer)
        level += 1
    return layer[0]


def _or_level(be, layer: list[Bit]) -> list[Bit]:
    nxt = [be.eval_gate(GateKind.OR, layer[i], layer[i + 1]) for i in range(0, len(layer) - 1, 2)]
    if len(layer) % 2:
        nxt.append(layer[-1])
    return nxt


def flags(result: Word, cout: Bit, a_msb: Bit, b_msb: Bit) -> Flags:
    """NZCV for a result; ``a_msb``/``b_msb`` are the sign bits of the adder operands.

    The Z reduction tree and the three-step V expression share stages, so
    the unit takes max(log2 N, 3) bootstrapped levels.
    """
    be = result.backend
    s = result.msb
    with be.region("flags"):
        n = be.eval_gate(GateKind.COPY, s)
        c = be.eval_gate(GateKind.COPY, cout)
        na = be.eval_gate(GateKind.NOT, a_msb)
        nb = be.eval_gate(GateKind.NOT, b_msb)
        ns = be.eval_gate(GateKind.NOT, s)
        layer = list(result.bits)
        level = 0
        while len(layer) > 1 or level < 3:
            level += 1
            with be.stage(f"level{level}"):
                if len(layer) > 1:
                    with be.region("z"):
                        layer = _or_level(be, layer)
                with be.region("v"):
                    if level == 1:
                        pos = be.eval_gate(GateKind.AND, na, nb)
                        neg = be.eval_gate(GateKind.AND, a_msb, b_msb)
                    elif level == 2:
                        pos = be.eval_gate(GateKind.AND, pos, s)
                        neg = be.eval_gate(GateKind.AND, neg, ns)
                    elif level == 3:
                        v = be.eval_gate(GateKind.OR, pos, neg)
        z = be.eval_gate(GateKind.NOT, layer[0])
    return Flags(n, z, c, v)


def nz_flags(result: Word, prev: Flags) -> Flags:
    """N and Z from ``result``; C and V carried over from ``prev``."""
    be = result.backend
    with be.region("flags"):
        n = be.eval_gate(GateKind.COPY, result.msb)
        z = be.eval_gate(GateKind.NOT, or_reduce(result))
        c = be.eval_gate(GateKind.COPY, prev.c)
        v = be.eval_gate(GateKind.COPY, prev.v)
    return Flags(n, z, c, v)


def sub_flags(a: Word, b: Word, diff: Word, cout: Bit) -> Flags:
    """Flags of ``a - b`` computed as ``a + NOT b + 1``."""
    be = a.backend
    with be.region("flags"):
        nb_msb = be.eval_gate(GateKind.NOT, b.msb)
    return flags(diff, cout, a.msb, nb_msb)
