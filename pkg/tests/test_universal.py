from __future__ import annotations

import numpy as np
import pytest

from sparseca.core import PERIODIC, image
from sparseca.errors import ParameterError, QuiescenceError
from sparseca.interp import rule_of
from sparseca.lang import validate
from sparseca.programs import builtin_program
from sparseca.sim import decode, find_macrocells
from sparseca.universal import (UniversalParams, classify_macrocell, min_dimensions, scenario,
                                staircase_ok, target_profile, universal_oracle,
                                universal_program)

XOR = builtin_program("xor")
IDENTITY = builtin_program("identity")


def test_params_checks():
    with pytest.raises(ParameterError):
        UniversalParams(6, 60, XOR).check()
    with pytest.raises(ParameterError):
        UniversalParams(4, 20, XOR).check()
    with pytest.raises(QuiescenceError):
        UniversalParams(8, 60, builtin_program("algorithm1")).check()


def test_min_dimensions():
    prof = target_profile(XOR)
    assert min_dimensions(XOR, prof) == (280, 6 * 280 + prof.time_steps)
    Q, U = min_dimensions(XOR, prof, storage=False)
    assert Q % 4 == 0 and Q >= 4 and U == 6 * Q + prof.time_steps


def test_universal_program_valid():
    p = universal_program(UniversalParams(4, 30, XOR))
    assert validate(p) == []
    assert p.param("CSize") == 4 and p.param("WPeriod") == 30


@pytest.mark.parametrize("target,cells", [(XOR, [1, 0, 0, 1, 1, 0, 1, 0]),
                                          (IDENTITY, [1, 1, 0, 1, 0, 0])])
def test_small_decode(target, cells):
    sc = scenario(target, cells, periods=3, Q=4, U=30)
    got = decode(sc.descriptor, sc.block.rows, PERIODIC)
    want = [np.array(cells, dtype=np.uint64)]
    for _ in range(2):
        want.append(image(rule_of(target), want[-1], PERIODIC))
    assert np.array_equal(got, np.array(want))


def test_classification_cases():
    sc = scenario(IDENTITY, [1, 1, 0, 1, 1], periods=3, Q=8, U=50)
    d = sc.descriptor
    got = {}
    for a in find_macrocells(d, sc.block):
        if a[1] + d.U <= sc.block.T:
            got[a] = classify_macrocell(d, sc.block, a)
            assert staircase_ok(d, sc.block, a)
    assert got[(16, 50)] == 4 and got[(0, 50)] == 1


def test_oracle_blank_is_never_demanding():
    sc = scenario(XOR, [1, 0, 1, 1], periods=1, Q=4, U=30)
    orc = universal_oracle(sc.program.layout, 4, 30)
    for delta in (-1, 0, 1):
        assert not orc(np.zeros(3, dtype=np.uint64), delta).any()
