"""Iterative carry-save multipliers.

Each of the N iterations ANDs the multiplicand with the current multiplier
bit, adds that row into the running upper half ``P`` and shifts the
``[carry, P, B]`` chain right by one. The row gates form their own stage, so
on a staged backend an iteration's row waits for the previous adder.
"""

from __future__ import annotations

from ..gates import GateKind
from .adder import add
from .word import Word, const_word, same_width


def _multiply(a: Word, b: Word, signed: bool) -> Word:
    n = same_width(a, b)
    be = a.backend
    p = [be.constant(False) for _ in range(n)]
    low = list(b.bits)
    for it in range(n):
        with be.region(f"iter{it}"):
            with be.stage("row"):
                sel = low[0]
                row = []
                for j in range(n):
                    # Baugh-Wooley: complement the sign-weighted partial products.
                    negate = signed and ((j == n - 1) != (it == n - 1))
                    kind = GateKind.NAND if negate else GateKind.AND
                    row.append(be.eval_gate(kind, a.bits[j], sel))
            total, cout = add(Word(be, tuple(p)), Word(be, tuple(row)))
        low = low[1:] + [total.bits[0]]
        p = list(total.bits[1:]) + [cout]
    if signed:
        # Constant 2**N + 2**(2N-1) folded into the upper half.
        with be.region("correction"):
            offset = const_word(be, 1 | (1 << (n - 1)), n)
            upper, _ = add(Word(be, tuple(p)), offset)
        p = list(upper.bits)
    return Word(be, tuple(low + p))


def mul_unsigned(a: Word, b: Word) -> Word:
    """Full 2N-bit unsigned product."""
    with a.backend.region("mul"):
        return _multiply(a, b, signed=False)


def mul_signed(a: Word, b: Word) -> Word:
    """Full 2N-bit two's-complement product (modified Baugh-Wooley rows)."""
    with a.backend.region("smul"):
        return _multiply(a, b, signed=True)
