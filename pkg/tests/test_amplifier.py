from __future__ import annotations

import pytest

from sparseca.amplifier import (AmplifierSpec, amplifier_text, build_amplifier, certificate_row,
                                chain_descriptors, check_level, dims, find_constants,
                                sparse_chain)
from sparseca.errors import ParameterError, SearchError
from sparseca.lang import parse
from sparseca.programs import builtin_program
from sparseca.transforms import IDENTITY, SPARSE, sparse_descriptor, sparsify

CONSTANTS = (131072, 1, 1048576, 1)


def test_dims_polynomial():
    assert dims((2, 2, 3, 1), 2) == (18, 9)


def test_text_levels_parse():
    p = parse(amplifier_text(3, CONSTANTS, "Sparsify"))
    assert p.param("Level") == 3
    assert p.param("CSize") == CONSTANTS[0] * 4


def test_found_constants_small_horizon():
    assert find_constants(SPARSE, horizon=2) == CONSTANTS


def test_spec_levels_consistent():
    spec = build_amplifier(SPARSE, horizon=2, constants=CONSTANTS)
    assert [r.n for r in spec.certificate] == [0, 1, 2]
    assert all(check_level(spec, n) == [] for n in range(3))
    assert spec.certificate_table().splitlines()[1].startswith("0 131072 1048576")


def test_bad_constants_rejected():
    with pytest.raises(SearchError):
        build_amplifier(SPARSE, horizon=1, constants=(64, 1, 1024, 1))


def test_identity_has_builtin():
    assert certificate_row(IDENTITY, CONSTANTS, 0).slack_q >= 0


def test_chain_book():
    book = sparse_chain(lambda n: n != 1, 2, Q=[4, 4, 4], U=[30, 30, 30])
    assert book.M == [1, 1, 5]
    assert book.B == [1, 4, 16, 320] and book.W == [1, 30, 900, 135000]
    with pytest.raises(ParameterError):
        sparse_chain(lambda n: True, 2)


def test_chain_descriptors_compose():
    x = builtin_program("xor")
    inner = sparse_descriptor(1, x)
    outer = sparse_descriptor(1, sparsify(1, x), sparsify(1, sparsify(1, x)))
    chain = chain_descriptors([outer, inner])
    assert chain[0] is outer and chain[1].Q == 9


def test_spec_program_cache():
    spec = AmplifierSpec(SPARSE, CONSTANTS, 1)
    assert spec.program(1) is spec.program(1)
