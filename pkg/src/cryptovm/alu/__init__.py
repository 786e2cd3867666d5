"""Functional units built as circuits over a gate backend."""

from .adder import GPPair, add, add_sub_select, carry_scan, gp, odot, sub
from .divider import div_unsigned
from .flags import Flags, flags, nz_flags, or_reduce, sub_flags
from .logic import bfc, bfi, bitwise, not_word, rbit, rev
from .multiplier import mul_signed, mul_unsigned
from .shifter import ShiftKind, shift_imm, shift_reg
from .word import (
    WidthError,
    Word,
    bits_to_int,
    check_width,
    const_word,
    copy_word,
    decrypt_int,
    decrypt_lanes,
    decrypt_word,
    encrypt_int,
    encrypt_lanes,
    encrypt_word,
    int_to_bits,
    make_word,
    same_width,
)

__all__ = [
    "Flags",
    "GPPair",
    "ShiftKind",
    "WidthError",
    "Word",
    "add",
    "add_sub_select",
    "bfc",
    "bfi",
    "bits_to_int",
    "bitwise",
    "carry_scan",
    "check_width",
    "const_word",
    "copy_word",
    "decrypt_int",
    "decrypt_lanes",
    "decrypt_word",
    "div_unsigned",
    "encrypt_int",
    "encrypt_lanes",
    "encrypt_word",
    "flags",
    "gp",
    "int_to_bits",
    "make_word",
    "mul_signed",
    "mul_unsigned",
    "not_word",
    "nz_flags",
    "odot",
    "or_reduce",
    "rbit",
    "rev",
    "same_width",
    "shift_imm",
    "shift_reg",
    "sub",
    "sub_flags",
]
