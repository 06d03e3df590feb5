from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseca.interp import (agent_result, compile_program, eval_program, make_agent,
                             measure_costs, rule_of, run_agent, static_bound)
from sparseca.lang import parse
from sparseca.programs import builtin_program

MOD6 = parse("num field V <= 5\nbool field F\n\nV <- V- + V+ mod 6\nF <- F+ != (V = 3)\n")


def test_xor_truth_table():
    p = builtin_program("xor")
    for a in (0, 1):
        for b in (0, 1):
            for c in (0, 1):
                assert eval_program(p, a, b, c) == a ^ b ^ c


def test_compiled_agrees_with_evaluator():
    for p in (builtin_program("algorithm1"), MOD6):
        f = compile_program(p)
        n = 1 << p.K
        for a in range(n):
            for b in range(n):
                for c in range(n):
                    assert f(a, b, c) == eval_program(p, a, b, c)


def test_rule_vectorized_matches_scalar():
    r = rule_of(MOD6)
    vals = np.arange(16, dtype=r.dtype)
    a, b, c = np.meshgrid(vals, vals, vals, indexing="ij")
    got = r.apply_vec(a.ravel(), b.ravel(), c.ravel())
    want = [eval_program(MOD6, int(x), int(y), int(z))
            for x, y, z in zip(a.ravel(), b.ravel(), c.ravel())]
    assert list(got) == want


def test_cost_modes():
    x = builtin_program("xor")
    ex = measure_costs(x, "exhaustive")
    bd = measure_costs(x, "bound")
    assert ex.time_steps <= bd.time_steps and ex.space_bits <= bd.space_bits
    assert static_bound(x)[0] == bd.time_steps


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 15), st.integers(0, 15), st.integers(0, 15))
def test_agent_backends_agree(a, b, c):
    p = MOD6
    want = eval_program(p, a, b, c)
    K, Q = p.K, 12

    def bits(v):
        return [(v >> (K - 1 - j)) & 1 for j in range(K)]
    for backend in ("oracle", "literal"):
        m = run_agent(make_agent(p, Q, bits(a), bits(b), bits(c), backend=backend))
        assert agent_result(m) == want


def test_agent_rejects_unknown_backend():
    with pytest.raises(Exception):
        make_agent(builtin_program("xor"), 8, [0], [0], [0], backend="nope")
