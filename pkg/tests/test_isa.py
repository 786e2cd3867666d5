import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cryptovm.isa import CONDITIONS, AsmError, Instruction, assemble, disassemble

LOOP = """\
MOV    R0    R0    42
Loop_label:
    SUBS   R0    R0    1
    B_NE   Loop_label
"""

LOAD_ADD_STORE = """\
.equ READ_ADDR1 0
.equ READ_ADDR2 1
.equ WRITE_ADDR 2
LOAD    R1  READ_ADDR1
LOAD    R2  READ_ADDR2
ADD     R0  R1, R2
STORE   R0  WRITE_ADDR
"""


def test_loop_listing():
    p = assemble(LOOP)
    assert len(p) == 3
    assert p.labels == {"Loop_label": 1}
    assert p[0] == Instruction("MOV", rd=0, imms=(42,))
    assert p[1] == Instruction("SUB", rd=0, srcs=(0,), imms=(1,), sets_flags=True)
    assert p[2].cond == "NE" and p[2].target_index == 1
    assert p.word_size == 32


def test_load_add_store_listing():
    p = assemble(LOAD_ADD_STORE)
    assert [i.name for i in p.instructions] == ["LOAD", "LOAD", "ADD", "STORE"]
    assert p[0].rd == 1 and p[0].imms == (0,)
    assert p[2].srcs == (1, 2)
    assert p[3].srcs == (0,) and p[3].imms == (2,)


def test_equ_may_follow_use():
    p = assemble("LOAD R1 LATER\n.equ LATER 5\n")
    assert p[0].imms == (5,)


def test_syntax_variants():
    p = assemble(
        "; header\n"
        ".word_size 16\n"
        "start: add r1,r2,0x10   # trailing\n"
        "  lls R3 R3 15\n"
        "a: b: B start\n"
        "CMP R1, -4\n"
        "BFI R1 R2 4 8\n"
        "HALT\n"
    )
    assert p.word_size == 16
    assert p.labels == {"start": 0, "a": 2, "b": 2}
    assert p[0] == Instruction("ADD", rd=1, srcs=(2,), imms=(16,))
    assert p[3] == Instruction("CMP", srcs=(1,), imms=(-4,), sets_flags=True)
    assert p[4].imms == (4, 8)


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ("FOO R1 R2", 1, "unknown mnemonic"),
        ("ADD R1 R2 R3\nADD R1 R2", 2, "takes 3"),
        ("HALT\nB nowhere", 2, "unresolved label"),
        ("MOV R16 1", 1, "out of range"),
        ("ADD R1 R2 12q", 1, "malformed"),
        ("LLS R1 R2 33", 1, "outside"),
        ("x: HALT\nx: HALT", 2, "duplicate"),
        ("BFC R1 30 4", 1, "exceeds"),
        ("LOAD R1 NOWHERE", 1, "unknown address"),
        (".org 4", 1, "unknown directive"),
        ("ADD R1 R2 0x1_0000_0000", 1, "malformed"),
        ("ADD R1 R2 4294967296", 1, "outside"),
    ],
)
def test_errors_name_the_line(text, line, fragment):
    with pytest.raises(AsmError, match=fragment) as info:
        assemble(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


def test_register_count_is_configurable():
    assemble("MOV R31 1", regs=32)
    with pytest.raises(AsmError):
        assemble("MOV R8 1", regs=8)


def test_word_size_conflict():
    with pytest.raises(AsmError):
        assemble(".word_size 16\nHALT", word_size=32)
    assert assemble("HALT", word_size=16).word_size == 16


def test_disassemble_canonical_form():
    text = disassemble(assemble("MOV R0 0x2A\nL: SUBS R0 R0 1\nB_NE L\n"))
    assert text.splitlines() == [".word_size 32", "    MOV R0, 42", "L:", "    SUBS R0, R0, 1", "    B_NE L"]
    assert assemble(disassemble(assemble(LOOP))) == assemble(LOOP)


def test_label_at_end_survives_roundtrip():
    p = assemble("B done\ndone:\n")
    assert p.labels == {"done": 1}
    assert assemble(disassemble(p)) == p


# -- roundtrip property ---------------------------------------------------------

REG = st.integers(0, 15).map(lambda r: f"R{r}")
IMM = st.integers(-(1 << 31), (1 << 32) - 1).map(str)
LABELS = ["top", "mid", "end_", "L1"]


def operand_lines():
    three = st.sampled_from(
        ["ADD", "ADDS", "SUB", "SUBS", "MUL", "MULS", "SMUL", "SMULS", "UDIV", "AND", "OR", "XOR", "ORN"]
    )
    shifts = st.sampled_from(["LLS", "LRS", "ARS"])
    return st.one_of(
        st.tuples(three, REG, REG, st.one_of(REG, IMM)).map(lambda t: f"{t[0]} {t[1]}, {t[2]}, {t[3]}"),
        st.tuples(shifts, REG, REG, st.one_of(REG, st.integers(0, 32).map(str))).map(lambda t: " ".join(t)),
        st.tuples(REG, st.one_of(REG, IMM)).map(lambda t: f"MOV {t[0]} {t[1]}"),
        st.tuples(REG, st.one_of(REG, IMM)).map(lambda t: f"NOT {t[0]} {t[1]}"),
        st.tuples(REG, st.one_of(REG, IMM)).map(lambda t: f"CMP {t[0]} {t[1]}"),
        st.tuples(st.sampled_from(["RBIT", "REV"]), REG, REG).map(lambda t: " ".join(t)),
        st.tuples(REG, st.integers(0, 31), st.integers(0, 1)).map(lambda t: f"BFC {t[0]} {t[1]} {t[2]}"),
        st.tuples(REG, REG, st.integers(0, 16), st.integers(0, 16)).map(lambda t: f"BFI {t[0]} {t[1]} {t[2]} {t[3]}"),
        st.tuples(REG, st.integers(0, 1000)).map(lambda t: f"LOAD {t[0]} {t[1]}"),
        st.tuples(REG, st.integers(0, 1000)).map(lambda t: f"STORE {t[0]} {t[1]}"),
        st.tuples(st.sampled_from(["B"] + [f"B_{c}" for c in CONDITIONS]), st.sampled_from(LABELS)).map(" ".join),
        st.just("HALT"),
    )


@st.composite
def programs(draw):
    body = draw(st.lists(operand_lines(), max_size=25))
    lines = list(body)
    for label in LABELS:
        lines.insert(draw(st.integers(0, len(lines))), f"{label}:")
    return "\n".join(lines)


@settings(max_examples=200, deadline=None)
@given(programs())
def test_assemble_disassemble_roundtrip(text):
    p = assemble(text)
    again = assemble(disassemble(p))
    assert again == p
    assert disassemble(again) == disassemble(p)
