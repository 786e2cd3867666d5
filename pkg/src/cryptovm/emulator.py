"""Fetch/decode/execute loop over encrypted registers and memory.

Register and flag state are encrypted words. Control flow is the only thing
the evaluator learns: unconditional branches are resolved locally and every
conditional branch asks a :class:`BranchOracle` held by the key owner.
"""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import memfile
from .alu import (
    Flags,
    ShiftKind,
    Word,
    add,
    bfc,
    bfi,
    bitwise,
    check_width,
    const_word,
    copy_word,
    div_unsigned,
    flags,
    mul_signed,
    mul_unsigned,
    not_word,
    nz_flags,
    rbit,
    rev,
    shift_imm,
    shift_reg,
    sub,
    sub_flags,
)
from .gates import Backend
from .isa import CONDITIONS, Instruction, Program

logger = logging.getLogger(__name__)

HALTED = "halted"
END = "end"
STEP_LIMIT = "step_limit"
ERROR = "error"
RUNNING = "running"


class EmulatorError(RuntimeError):
    pass


class MemoryAccessError(EmulatorError):
    pass


def cond_predicate(cond: str, n: bool, z: bool, c: bool, v: bool) -> bool:
    """ARM condition-code semantics over cleartext NZCV."""
    table = {
        "EQ": z,
        "NE": not z,
        "CS": c,
        "CC": not c,
        "MI": n,
        "PL": not n,
        "VS": v,
        "VC": not v,
        "HI": c and not z,
        "LS": not c or z,
        "GE": n == v,
        "LT": n != v,
        "GT": not z and n == v,
        "LE": z or n != v,
        "AL": True,
    }
    try:
        return table[cond]
    except KeyError:
        raise ValueError(f"unknown condition code {cond!r}") from None


class BranchOracle(ABC):
    """Key-owner side of a conditional branch."""

    @abstractmethod
    def resolve(self, cond: str, nzcv: Flags) -> bool: ...

    def next_pc(self, cond: str, nzcv: Flags, pc: int, target: int) -> int:
        return target if self.resolve(cond, nzcv) else pc + 4


class DataMemory:
    """Encrypted word-addressed data memory, held in RAM or backed by a file."""

    def __init__(self, backend: Backend, width: int, words: list[Word] | None = None, path: Path | None = None):
        self.backend = backend
        self.width = width
        self._words = words
        self._path = path
        self._count = len(words) if words is not None else 0
        if path is not None:
            file_width, self._count = memfile.read_header(path.read_bytes()[: memfile.HEADER.size])
            if file_width != width:
                raise EmulatorError(f"memory file {path} holds {file_width}-bit words, machine is {width}-bit")
            memfile.unpack(path.read_bytes())  # rejects truncated files up front

    @classmethod
    def from_values(cls, backend: Backend, width: int, values: Sequence[int]) -> DataMemory:
        mask = (1 << width) - 1
        words = [Word(backend, tuple(backend.load_bits([bool((v & mask) >> i & 1) for i in range(width)]))) for v in values]
        return cls(backend, width, words=words)

    @classmethod
    def from_file(cls, backend: Backend, width: int, path: str | Path, mode: str = "buffer") -> DataMemory:
        path = Path(path)
        if mode == "file":
            return cls(backend, width, path=path)
        if mode != "buffer":
            raise ValueError(f"unknown memory mode {mode!r}")
        file_width, values = memfile.read(path)
        if file_width != width:
            raise EmulatorError(f"memory file {path} holds {file_width}-bit words, machine is {width}-bit")
        return cls.from_values(backend, width, values)

    def __len__(self) -> int:
        return self._count

    def _check(self, addr: int) -> None:
        if not 0 <= addr < self._count:
            raise MemoryAccessError(f"address {addr} outside data memory of {self._count} words")

    def _offset(self, addr: int) -> int:
        return memfile.HEADER.size + addr * memfile.word_bytes(self.width)

    def load(self, addr: int) -> Word:
        self._check(addr)
        if self._words is not None:
            return self._words[addr]
        nb = memfile.word_bytes(self.width)
        with open(self._path, "rb") as fh:
            fh.seek(self._offset(addr))
            raw = int.from_bytes(fh.read(nb), "little")
        return Word(self.backend, tuple(self.backend.load_bits([bool(raw >> i & 1) for i in range(self.width)])))

    def store(self, addr: int, w: Word) -> None:
        self._check(addr)
        if self._words is not None:
            self._words[addr] = w
            return
        raw = sum(1 << i for i, b in enumerate(self.backend.store_bits(w.bits)) if b)
        with open(self._path, "r+b") as fh:
            fh.seek(self._offset(addr))
            fh.write(raw.to_bytes(memfile.word_bytes(self.width), "little"))

    def serialized(self) -> list[int]:
        """Ciphertext words as they would be written to a memory file."""
        return [
            sum(1 << i for i, b in enumerate(self.backend.store_bits(self.load(a).bits)) if b)
            for a in range(self._count)
        ]

    def save(self, path: str | Path) -> None:
        if self._path is not None and Path(path).resolve() == self._path.resolve():
            return
        memfile.write(path, self.width, self.serialized())


@dataclass
class MachineState:
    backend: Backend
    width: int = 32
    regs: int = 16
    memory: DataMemory | None = None
    oracle: BranchOracle | None = None
    pc: int = 0
    status: str = RUNNING
    error: str | None = None
    stats: Counter = field(default_factory=Counter)
    _vregs: list[Word | None] = field(default_factory=list, repr=False)
    _nzcv: Flags | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        check_width(self.width)
        if self.regs < 1:
            raise ValueError("need at least one register")
        self._vregs = [None] * self.regs
        if self.memory is None:
            self.memory = DataMemory(self.backend, self.width, words=[])
        elif self.memory.width != self.width:
            raise EmulatorError(f"memory is {self.memory.width}-bit, machine is {self.width}-bit")

    @property
    def halted(self) -> bool:
        return self.status != RUNNING

    def reg(self, r: int) -> Word:
        # Registers start as encryptions of zero, materialised on first use.
        if self._vregs[r] is None:
            self._vregs[r] = const_word(self.backend, 0, self.width)
        return self._vregs[r]

    def set_reg(self, r: int, w: Word) -> None:
        self._vregs[r] = w

    @property
    def nzcv(self) -> Flags:
        if self._nzcv is None:
            zero = self.backend.constant(False)
            self._nzcv = Flags(zero, zero, zero, zero)
        return self._nzcv

    @nzcv.setter
    def nzcv(self, f: Flags) -> None:
        self._nzcv = f


def _operand(state: MachineState, ins: Instruction, k: int) -> Word:
    """Second source operand: register ``srcs[k]`` if present, else the immediate."""
    if len(ins.srcs) > k:
        return state.reg(ins.srcs[k])
    return const_word(state.backend, ins.imms[0] & ((1 << state.width) - 1), state.width)


def _shift(state: MachineState, ins: Instruction) -> Word:
    kind = ShiftKind[ins.mnemonic]
    src = state.reg(ins.srcs[0])
    if len(ins.srcs) > 1:
        return shift_reg(src, kind, state.reg(ins.srcs[1]))
    return shift_imm(src, kind, ins.imms[0])


def _execute(state: MachineState, ins: Instruction) -> None:
    be = state.backend
    op = ins.mnemonic
    if op == "MOV":
        if ins.srcs:
            state.set_reg(ins.rd, copy_word(state.reg(ins.srcs[0])))
        else:
            state.set_reg(ins.rd, _operand(state, ins, 0))
        return
    if op == "LOAD":
        state.set_reg(ins.rd, state.memory.load(ins.imms[0]))
        return
    if op == "STORE":
        state.memory.store(ins.imms[0], state.reg(ins.srcs[0]))
        return
    if op == "NOT":
        with be.region("exec"):
            state.set_reg(ins.rd, not_word(_operand(state, ins, 0)))
        return
    if op in ("RBIT", "REV"):
        fn = rbit if op == "RBIT" else rev
        with be.region("exec"):
            state.set_reg(ins.rd, fn(state.reg(ins.srcs[0])))
        return
    if op == "BFC":
        with be.region("exec"):
            state.set_reg(ins.rd, bfc(state.reg(ins.rd), *ins.imms))
        return
    if op == "BFI":
        with be.region("exec"):
            state.set_reg(ins.rd, bfi(state.reg(ins.rd), state.reg(ins.srcs[0]), *ins.imms))
        return

    a = state.reg(ins.srcs[0])
    if op in ("LLS", "LRS", "ARS"):
        with be.region("exec"):
            state.set_reg(ins.rd, _shift(state, ins))
        return
    b = _operand(state, ins, 1)
    if op in ("AND", "OR", "XOR", "ORN"):
        with be.region("exec"):
            state.set_reg(ins.rd, bitwise(op, a, b))
        return
    if op == "UDIV":
        with be.region("exec"):
            state.set_reg(ins.rd, div_unsigned(a, b))
        return
    if op in ("ADD", "SUB", "CMP"):
        with be.region("exec"):
            result, cout = add(a, b) if op == "ADD" else sub(a, b)
        if ins.sets_flags:
            # Flag update is a separate micro-op on the finished result.
            with be.region("nzcv"):
                state.nzcv = flags(result, cout, a.msb, b.msb) if op == "ADD" else sub_flags(a, b, result, cout)
        if op != "CMP":
            state.set_reg(ins.rd, result)
        return
    if op in ("MUL", "SMUL"):
        with be.region("exec"):
            product = (mul_unsigned if op == "MUL" else mul_signed)(a, b)
        low = product.slice(0, state.width)
        if ins.sets_flags:
            with be.region("nzcv"):
                state.nzcv = nz_flags(low, state.nzcv)
        state.set_reg(ins.rd, low)
        return
    raise EmulatorError(f"line {ins.line}: no implementation for {ins.name}")


def _branch(state: MachineState, ins: Instruction) -> None:
    target = ins.target_index * 4
    if ins.cond is None or ins.cond == "AL":
        state.pc = target
        return
    if state.oracle is None:
        raise EmulatorError(f"line {ins.line}: conditional branch needs a branch oracle")
    state.stats["branch_queries"] += 1
    nxt = state.oracle.next_pc(ins.cond, state.nzcv, state.pc, target)
    if nxt % 4:
        raise EmulatorError(f"oracle returned unaligned pc {nxt}")
    state.pc = nxt


def step(state: MachineState, program: Program) -> None:
    """Execute one instruction, advancing ``state.pc`` in place."""
    if state.halted:
        raise EmulatorError(f"machine is not running (status {state.status})")
    if program.word_size != state.width:
        raise EmulatorError(f"program is {program.word_size}-bit, machine is {state.width}-bit")
    idx = state.pc // 4
    if not 0 <= idx < len(program):
        # Running off the end of the program is a clean stop.
        state.status = END
        return
    ins = program[idx]
    state.stats["instructions"] += 1
    state.stats[f"op:{ins.name}"] += 1
    be = state.backend
    if ins.mnemonic == "HALT":
        state.status = HALTED
        return
    if ins.mnemonic == "B":
        _branch(state, ins)
        return
    with be.region(f"{state.pc:#06x}:{ins.name}"):
        _execute(state, ins)
    state.pc += 4


def run(state: MachineState, program: Program, max_steps: int = 1_000_000) -> MachineState:
    """Run until HALT, the end of the program, an error or ``max_steps`` instructions."""
    steps = 0
    while not state.halted:
        if steps >= max_steps:
            state.status = STEP_LIMIT
            logger.info("step limit of %d reached at pc %#x", max_steps, state.pc)
            break
        try:
            step(state, program)
        except (EmulatorError, OSError, ValueError) as exc:
            state.status = ERROR
            state.error = str(exc)
            logger.error("execution stopped at pc %#x: %s", state.pc, exc)
            break
        steps += 1
    return state


__all__ = [
    "CONDITIONS",
    "BranchOracle",
    "DataMemory",
    "EmulatorError",
    "MachineState",
    "MemoryAccessError",
    "cond_predicate",
    "run",
    "step",
]
