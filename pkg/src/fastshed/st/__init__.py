"""Structured Text generation and a reference interpreter for the generated subset."""

from .emit import EmitOptions, StProgram, emit_st, interpret_st, lse_inputs, run_edsa_st, run_lse_st
from .interp import parse, run_block

__all__ = ["EmitOptions", "StProgram", "emit_st", "interpret_st", "lse_inputs", "parse", "run_block", "run_edsa_st",
           "run_lse_st"]
