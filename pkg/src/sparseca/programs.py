"""Builtin payload programs shipped with the toolkit."""
from __future__ import annotations

from .lang.program import RuleProgram, parse

XOR = """\
bool field B

B <- (B- != B) != B+
"""

IDENTITY = """\
bool field B

B <- B
"""

ALWAYS_BLANK = """\
bool field B

B <- false
"""

ALGORITHM1 = """\
num param Modulus = 10
num field Counter <= Modulus - 1

proc Proc(n)
  if Counter- = n
    Counter <- Counter + 1 mod Modulus
  end
end

if Counter != Counter+
  Proc(Counter+)
else
  Proc(0)
end
"""

SOURCES = {"xor": XOR, "identity": IDENTITY, "always-blank": ALWAYS_BLANK,
           "algorithm1": ALGORITHM1}


def builtin_program(name: str) -> RuleProgram:
    try:
        return parse(SOURCES[name], name=name)
    except KeyError:
        raise KeyError(f"unknown builtin program {name!r}; choose from {sorted(SOURCES)}") from None
