from __future__ import annotations

import enum

from ..gates import GateKind
from .word import Word, WidthError, same_width


class ShiftKind(enum.Enum):
    LLS = "LLS"
    LRS = "LRS"
    ARS = "ARS"


def shift_imm(w: Word, kind: ShiftKind, amount: int) -> Word:
    """Shift by a cleartext amount using COPY and CONSTANT only."""
    n = w.width
    if not 0 <= amount <= n:
        raise WidthError(f"shift amount {amount} outside [0, {n}]")
    be = w.backend
    bits = w.bits

    def fill():
        if kind is ShiftKind.ARS:
            return be.eval_gate(GateKind.COPY, bits[-1])
        return be.constant(False)

    with be.region("shift_imm"):
        out = []
        for i in range(n):
            src = i - amount if kind is ShiftKind.LLS else i + amount
            out.append(be.eval_gate(GateKind.COPY, bits[src]) if 0 <= src < n else fill())
    return Word(be, tuple(out))


def shift_reg(w: Word, kind: ShiftKind, amount: Word) -> Word:
    """Barrel shifter: one MUX stage per amount bit, so the shift is ``amount mod N``."""
    n = same_width(w, amount)
    be = w.backend
    with be.region("barrel"):
        fill = w.msb if kind is ShiftKind.ARS else be.constant(False)
        cur = list(w.bits)
        stage, dist = 0, 1
        while dist < n:
            sel = amount.bits[stage]
            if kind is ShiftKind.LLS:
                moved = [cur[i - dist] if i >= dist else fill for i in range(n)]
            else:
                moved = [cur[i + dist] if i + dist < n else fill for i in range(n)]
            with be.stage(f"stage{stage + 1}"):
                cur = [be.eval_gate(GateKind.MUX, sel, moved[i], cur[i]) for i in range(n)]
            stage += 1
            dist *= 2
    return Word(be, tuple(cur))
