from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseca.lang import (DSLSyntaxError, ProgramError, decode_bits, encode_bits, inc_level,
                           parse, validate)
from sparseca.programs import SOURCES, builtin_program


@pytest.mark.parametrize("name", sorted(SOURCES))
def test_parse_print_roundtrip(name):
    p = builtin_program(name)
    q = parse(p.text)
    assert q.ast == p.ast and q.text == p.text


@pytest.mark.parametrize("name", sorted(SOURCES))
def test_bits_roundtrip(name):
    p = builtin_program(name)
    b = encode_bits(p)
    assert b.length == 8 * len(p.text.encode("utf-8"))
    assert decode_bits(b) == p


def test_layout_of_algorithm1():
    p = builtin_program("algorithm1")
    assert p.K == 4 and p.param("Modulus") == 10
    assert p.field_names == ["Counter"]


def test_syntax_error_position():
    with pytest.raises(DSLSyntaxError) as e:
        parse("bool field B\n\nB <- B +\n")
    assert "line 3" in str(e.value)


def test_unknown_field_rejected():
    with pytest.raises(ProgramError):
        parse("bool field B\n\nC <- B\n")


def test_inc_level():
    p = parse("num param Level = 3\nbool field B\n\nB <- B\n")
    assert inc_level(p).param("Level") == 4
    with pytest.raises(Exception):
        inc_level(builtin_program("xor"))


def test_validate_clean():
    assert validate(builtin_program("algorithm1")) == []


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 200), st.integers(0, 3))
def test_numeric_params_roundtrip(m, k):
    text = (f"num param M = {m}\nnum field V <= M\n\n"
            f"V <- V+ + {k} mod (M + 1)\n")
    p = parse(text)
    assert parse(p.text).ast == p.ast
    assert p.K == max(1, m.bit_length())
