"""The rule-programming language: parsing, checking, printing, encoding."""
from __future__ import annotations

from . import ast
from .builtins import BUILTINS, Builtin, register
from .parser import DSLSyntaxError, ProgramError, parse_expr
from .printer import expr_text, program_text
from .program import (RuleProgram, decode_bits, embed, encode_bits, from_ast, inc_level,
                      is_valid, layout_of, parse, validate)
from .values import Bits

__all__ = [
    "ast", "BUILTINS", "Builtin", "register", "DSLSyntaxError", "ProgramError", "parse_expr",
    "expr_text", "program_text", "RuleProgram", "decode_bits", "embed", "encode_bits", "from_ast",
    "inc_level", "is_valid", "layout_of", "parse", "validate", "Bits",
]
