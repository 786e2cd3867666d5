from __future__ import annotations

from ..gates import GateKind
from .adder import add_sub_select
from .word import Word, same_width


def div_unsigned(dividend: Word, divisor: Word, narrow: bool = False) -> Word:
    """Non-restoring unsigned division; returns the floor quotient only.

    The partial remainder is kept in N+1 bits so that divisors with the top
    bit set divide correctly. ``narrow`` keeps it at N bits, the classic N-bit
    datapath, which is one adder level shallower per iteration but exact only
    for divisors below ``2**(N-1)``. Division by zero returns whatever
    pattern the iteration produces (the evaluator cannot see the divisor).
    """
    n = same_width(dividend, divisor)
    be = dividend.backend
    width = n if narrow else n + 1
    with be.region("div"):
        acc = [be.constant(False) for _ in range(width)]
        d = list(divisor.bits) + [be.constant(False) for _ in range(width - n)]
        q = list(dividend.bits)
        d_word = Word(be, tuple(d))
        for it in range(n):
            with be.region(f"iter{it}"):
                sign = acc[-1]
                acc = [q[-1]] + acc[:-1]
                q = [None] + q[:-1]
                # Negative remainder: add the divisor back; otherwise subtract.
                sub_bit = be.eval_gate(GateKind.NOT, sign)
                total, _ = add_sub_select(Word(be, tuple(acc)), d_word, sub_bit)
                acc = list(total.bits)
                q[0] = be.eval_gate(GateKind.NOT, acc[-1])
    return Word(be, tuple(q))
