"""Assembly text format for the encrypted emulator.

One instruction per line; ``label:`` prefixes, ``;`` and ``#`` comments,
operands separated by whitespace and/or commas. Directives:
``.word_size 16|32`` and ``.equ NAME VALUE`` (symbolic memory addresses).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace

CONDITIONS = ("EQ", "NE", "CS", "CC", "MI", "PL", "VS", "VC", "HI", "LS", "GE", "LT", "GT", "LE", "AL")

ALU3 = ("ADD", "SUB", "MUL", "SMUL", "UDIV", "AND", "OR", "XOR", "ORN", "LLS", "LRS", "ARS")
FLAG_SETTING = ("ADD", "SUB", "MUL", "SMUL")
SHIFTS = ("LLS", "LRS", "ARS")
MNEMONICS = frozenset(
    ALU3
    + tuple(m + "S" for m in FLAG_SETTING)
    + ("LOAD", "STORE", "MOV", "NOT", "BFC", "BFI", "RBIT", "REV", "CMP", "B", "HALT")
    + tuple(f"B_{c}" for c in CONDITIONS)
)

_LABEL = re.compile(r"[A-Za-z_][A-Za-z0-9_]*$")
_SPLIT = re.compile(r"[\s,]+")


class AsmError(ValueError):
    def __init__(self, line: int, msg: str) -> None:
        super().__init__(f"line {line}: {msg}")
        self.line = line


@dataclass(frozen=True)
class Instruction:
    """Decoded instruction. ``srcs`` are source registers in operand order."""

    mnemonic: str
    rd: int | None = None
    srcs: tuple[int, ...] = ()
    imms: tuple[int, ...] = ()
    cond: str | None = None
    target: str | None = None
    sets_flags: bool = False
    target_index: int | None = None
    line: int = field(default=0, compare=False)

    @property
    def name(self) -> str:
        if self.mnemonic == "B" and self.cond:
            return f"B_{self.cond}"
        if self.sets_flags and self.mnemonic in FLAG_SETTING:
            return self.mnemonic + "S"
        return self.mnemonic

    @property
    def imm(self) -> int | None:
        return self.imms[0] if self.imms else None


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...]
    labels: dict[str, int]
    word_size: int = 32
    regs: int = 16

    def __len__(self) -> int:
        return len(self.instructions)

    def __getitem__(self, i: int) -> Instruction:
        return self.instructions[i]


_INT = re.compile(r"-?(0[xX][0-9a-fA-F]+|[0-9]+)")


def _parse_int(tok: str) -> int | None:
    if not _INT.fullmatch(tok):
        return None
    return int(tok, 16 if "x" in tok.lower() else 10)


class _Parser:
    def __init__(self, word_size: int, regs: int) -> None:
        self.word_size = word_size
        self.regs = regs
        self.equs: dict[str, int] = {}

    def reg(self, tok: str, line: int) -> int:
        m = re.fullmatch(r"[Rr](\d+)", tok)
        if not m:
            raise AsmError(line, f"expected a register, got {tok!r}")
        r = int(m.group(1))
        if r >= self.regs:
            raise AsmError(line, f"register R{r} out of range (R0..R{self.regs - 1})")
        return r

    def is_reg(self, tok: str) -> bool:
        return re.fullmatch(r"[Rr]\d+", tok) is not None

    def imm(self, tok: str, line: int, lo: int | None = None, hi: int | None = None) -> int:
        value = _parse_int(tok)
        if value is None:
            raise AsmError(line, f"malformed immediate {tok!r}")
        n = self.word_size
        lo = -(1 << (n - 1)) if lo is None else lo
        hi = (1 << n) - 1 if hi is None else hi
        if not lo <= value <= hi:
            raise AsmError(line, f"immediate {value} outside [{lo}, {hi}]")
        return value

    def addr(self, tok: str, line: int) -> int:
        if tok in self.equs:
            return self.equs[tok]
        value = _parse_int(tok)
        if value is None:
            raise AsmError(line, f"unknown address symbol {tok!r}")
        if value < 0:
            raise AsmError(line, f"negative memory address {value}")
        return value

    def instruction(self, mnem: str, ops: list[str], line: int) -> Instruction:
        upper = mnem.upper()
        if upper not in MNEMONICS:
            raise AsmError(line, f"unknown mnemonic {mnem!r}")

        def arity(*counts: int) -> None:
            if len(ops) not in counts:
                want = " or ".join(str(c) for c in counts)
                raise AsmError(line, f"{upper} takes {want} operands, got {len(ops)}")

        def reg_or_imm(tok: str, **bounds) -> tuple[tuple[int, ...], tuple[int, ...]]:
            if self.is_reg(tok):
                return (self.reg(tok, line),), ()
            return (), (self.imm(tok, line, **bounds),)

        if upper == "HALT":
            arity(0)
            return Instruction("HALT", line=line)
        if upper == "B" or upper.startswith("B_"):
            arity(1)
            if not _LABEL.match(ops[0]):
                raise AsmError(line, f"malformed label {ops[0]!r}")
            cond = upper[2:] if upper.startswith("B_") else None
            return Instruction("B", cond=cond, target=ops[0], line=line)
        if upper == "LOAD":
            arity(2)
            return Instruction("LOAD", rd=self.reg(ops[0], line), imms=(self.addr(ops[1], line),), line=line)
        if upper == "STORE":
            arity(2)
            return Instruction("STORE", srcs=(self.reg(ops[0], line),), imms=(self.addr(ops[1], line),), line=line)
        if upper == "MOV":
            arity(2, 3)
            rd = self.reg(ops[0], line)
            if len(ops) == 3:
                # Three-operand form "MOV Rd Rx imm": the middle register is ignored.
                self.reg(ops[1], line)
                return Instruction("MOV", rd=rd, imms=(self.imm(ops[2], line),), line=line)
            srcs, imms = reg_or_imm(ops[1])
            return Instruction("MOV", rd=rd, srcs=srcs, imms=imms, line=line)
        if upper == "NOT":
            arity(2)
            srcs, imms = reg_or_imm(ops[1])
            return Instruction("NOT", rd=self.reg(ops[0], line), srcs=srcs, imms=imms, line=line)
        if upper == "CMP":
            arity(2)
            srcs, imms = reg_or_imm(ops[1])
            return Instruction(
                "CMP", srcs=(self.reg(ops[0], line),) + srcs, imms=imms, sets_flags=True, line=line
            )
        if upper in ("RBIT", "REV"):
            arity(2)
            if upper == "REV" and self.word_size % 8:
                raise AsmError(line, "REV needs a word size that is a multiple of 8")
            return Instruction(upper, rd=self.reg(ops[0], line), srcs=(self.reg(ops[1], line),), line=line)
        if upper in ("BFC", "BFI"):
            arity(3 if upper == "BFC" else 4)
            rd = self.reg(ops[0], line)
            srcs = (self.reg(ops[1], line),) if upper == "BFI" else ()
            lsb = self.imm(ops[-2], line, 0, self.word_size)
            width = self.imm(ops[-1], line, 0, self.word_size)
            if lsb + width > self.word_size:
                raise AsmError(line, f"bit field [{lsb}, {lsb + width}) exceeds {self.word_size} bits")
            return Instruction(upper, rd=rd, srcs=srcs, imms=(lsb, width), line=line)

        # Three-operand ALU forms, with an optional S suffix.
        base, sets = upper, False
        if upper not in ALU3:
            base, sets = upper[:-1], True
        arity(3)
        bounds = {"lo": 0, "hi": self.word_size} if base in SHIFTS else {}
        srcs, imms = reg_or_imm(ops[2], **bounds)
        return Instruction(
            base,
            rd=self.reg(ops[0], line),
            srcs=(self.reg(ops[1], line),) + srcs,
            imms=imms,
            sets_flags=sets,
            line=line,
        )


def _strip(raw: str) -> str:
    cut = len(raw)
    for ch in ";#":
        i = raw.find(ch)
        if i >= 0:
            cut = min(cut, i)
    return raw[:cut].strip()


def assemble(text: str, word_size: int | None = None, regs: int = 16) -> Program:
    """Two-pass assembly: collect labels and directives, then decode operands."""
    lines = text.splitlines()
    size = 32
    declared: int | None = None
    for lineno, raw in enumerate(lines, 1):
        toks = [t for t in _SPLIT.split(_strip(raw)) if t]
        if toks and toks[0].lower() == ".word_size":
            if len(toks) != 2 or toks[1] not in ("16", "32"):
                raise AsmError(lineno, ".word_size takes 16 or 32")
            declared = int(toks[1])
    if declared is not None:
        if word_size is not None and word_size != declared:
            raise AsmError(0, f"program declares .word_size {declared} but {word_size} was requested")
        size = declared
    elif word_size is not None:
        size = word_size

    parser = _Parser(size, regs)
    labels: dict[str, int] = {}
    pending: list[tuple[int, str, list[str]]] = []
    for lineno, raw in enumerate(lines, 1):
        body = _strip(raw)
        while True:
            m = re.match(r"([A-Za-z_][A-Za-z0-9_]*)\s*:(.*)$", body)
            if not m:
                break
            name = m.group(1)
            if name in labels:
                raise AsmError(lineno, f"duplicate label {name!r}")
            labels[name] = len(pending)
            body = m.group(2).strip()
        toks = [t for t in _SPLIT.split(body) if t]
        if not toks:
            continue
        head = toks[0].lower()
        if head == ".word_size":
            continue
        if head == ".equ":
            if len(toks) != 3 or not _LABEL.match(toks[1]):
                raise AsmError(lineno, ".equ takes NAME VALUE")
            value = _parse_int(toks[2])
            if value is None or value < 0:
                raise AsmError(lineno, f"bad .equ value {toks[2]!r}")
            parser.equs[toks[1]] = value
            continue
        if head.startswith("."):
            raise AsmError(lineno, f"unknown directive {toks[0]!r}")
        pending.append((lineno, toks[0], toks[1:]))

    decoded = []
    for lineno, mnem, ops in pending:
        ins = parser.instruction(mnem, ops, lineno)
        if ins.target is not None:
            if ins.target not in labels:
                raise AsmError(lineno, f"unresolved label {ins.target!r}")
            ins = replace(ins, target_index=labels[ins.target])
        decoded.append(ins)
    return Program(tuple(decoded), labels, size, regs)


def format_instruction(ins: Instruction) -> str:
    ops: list[str] = []
    if ins.mnemonic == "B":
        ops.append(ins.target or "")
    else:
        if ins.rd is not None:
            ops.append(f"R{ins.rd}")
        ops.extend(f"R{r}" for r in ins.srcs)
        ops.extend(str(v) for v in ins.imms)
    return ins.name + (" " + ", ".join(ops) if ops else "")


def disassemble(p: Program) -> str:
    by_index: dict[int, list[str]] = {}
    for name, idx in p.labels.items():
        by_index.setdefault(idx, []).append(name)
    out = [f".word_size {p.word_size}"]
    for idx in range(len(p.instructions) + 1):
        for name in sorted(by_index.get(idx, ())):
            out.append(f"{name}:")
        if idx < len(p.instructions):
            out.append("    " + format_instruction(p.instructions[idx]))
    return "\n".join(out) + "\n"
