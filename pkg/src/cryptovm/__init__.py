"""Instruction-set emulator over encrypted bits."""

__version__ = "0.1.0"
