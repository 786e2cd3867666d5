"""Parallel-prefix (Kogge-Stone) adder and the units built on it."""

from __future__ import annotations

from dataclasses import dataclass

from ..gates import Backend, Bit, GateKind
from .word import Word, same_width


@dataclass(frozen=True)
class GPPair:
    g: Bit
    p: Bit


def gp(be: Backend, a: Bit, b: Bit) -> GPPair:
    return GPPair(be.eval_gate(GateKind.AND, a, b), be.eval_gate(GateKind.XOR, a, b))


def odot(be: Backend, hi: GPPair, lo: GPPair) -> GPPair:
    """Prefix combiner ``(g_hi + p_hi*g_lo, p_hi*p_lo)``; the p gate is independent of the g pair."""
    t = be.eval_gate(GateKind.AND, hi.p, lo.g)
    g = be.eval_gate(GateKind.OR, hi.g, t)
    p = be.eval_gate(GateKind.AND, hi.p, lo.p)
    return GPPair(g, p)


def carry_scan(be: Backend, pairs: list[GPPair]) -> list[GPPair]:
    """Kogge-Stone scan: level k combines each element with the one 2**(k-1) below it."""
    cur = list(pairs)
    n = len(cur)
    dist, level = 1, 1
    while dist < n:
        with be.stage(f"carry/level{level}"):
            cur = cur[:dist] + [odot(be, cur[i], cur[i - dist]) for i in range(dist, n)]
        dist *= 2
        level += 1
    return cur


def add(a: Word, b: Word, cin: Bit | None = None) -> tuple[Word, Bit]:
    """``(a + b + cin) mod 2**N`` and the carry out."""
    n = same_width(a, b)
    be = a.backend
    with be.region("adder"):
        with be.stage("gp"):
            pairs = [gp(be, x, y) for x, y in zip(a.bits, b.bits)]
        if cin is not None:
            with be.stage("cin"):
                p0 = pairs[0]
                t = be.eval_gate(GateKind.AND, p0.p, cin)
                pairs[0] = GPPair(be.eval_gate(GateKind.OR, p0.g, t), p0.p)
        scanned = carry_scan(be, pairs)
        with be.stage("sum"):
            low = cin if cin is not None else be.constant(False)
            carries = [low] + [s.g for s in scanned[:-1]]
            total = [be.eval_gate(GateKind.XOR, pairs[i].p, carries[i]) for i in range(n)]
    return Word(be, tuple(total)), scanned[-1].g


def sub(a: Word, b: Word) -> tuple[Word, Bit]:
    """``(a - b) mod 2**N``; the carry out is 1 exactly when no borrow occurs."""
    same_width(a, b)
    be = a.backend
    with be.region("subtractor"):
        one = be.constant(True)
        nb = Word(be, tuple(be.eval_gate(GateKind.NOT, x) for x in b.bits))
        return add(a, nb, cin=one)


def add_sub_select(a: Word, b: Word, sub_bit: Bit) -> tuple[Word, Bit]:
    """``a + b`` when ``sub_bit`` is 0, ``a - b`` when it is 1."""
    same_width(a, b)
    be = a.backend
    with be.region("addsub"):
        with be.stage("invert"):
            nb = Word(be, tuple(be.eval_gate(GateKind.XOR, x, sub_bit) for x in b.bits))
        return add(a, nb, cin=sub_bit)
