from __future__ import annotations

import numpy as np
import pytest

from sparseca.core import PERIODIC, run, xor_rule
from sparseca.errors import ParameterError, PreconditionError
from sparseca.interp import rule_of
from sparseca.lang import parse, validate
from sparseca.programs import builtin_program
from sparseca.sim import decode
from sparseca.transforms import (SPARSE, column_bound, compose_transform, g1, g2, g_dispatch,
                                 l_rule, l_set, partial_sparse, sparse_descriptor, sparse_oracle,
                                 sparsify, sparsify_with_map)

XOR = builtin_program("xor")


@pytest.mark.parametrize("n", [1, 2, 3, 8])
def test_sparsify_valid_and_printable(n):
    s = sparsify(n, XOR)
    assert validate(s) == []
    assert parse(s.text).ast == s.ast
    assert s.param("N") == n


def test_sparsify_deterministic():
    assert sparsify(3, XOR).text == sparsify(3, XOR).text


@pytest.mark.parametrize("n", [1, 3])
def test_identity_payload_decodes(n):
    p = builtin_program("identity")
    host, mp = sparsify_with_map(n, p)
    d = sparse_descriptor(n, p, host, mp)
    cells = np.array([1, 0, 1, 1, 0], dtype=np.uint64)
    blk = run(rule_of(host), d.encode_cells(cells), 3 * d.U - 1, boundary=PERIODIC)
    assert np.array_equal(decode(d, blk.rows, PERIODIC), np.tile(cells, (3, 1)))


@pytest.mark.parametrize("G", [g1, g2])
def test_g_transforms_keep_simulation(G):
    n = 4
    host, mp = sparsify_with_map(n, XOR)
    h = G(n, host)
    assert validate(h) == []
    d = sparse_descriptor(n, XOR, h, mp)
    cells = np.array([0, 1, 1, 0, 1, 0, 0], dtype=np.uint64)
    blk = run(rule_of(h), d.encode_cells(cells), 4 * d.U - 1, boundary=PERIODIC)
    want = run(xor_rule(), cells, 3, boundary=PERIODIC).rows
    assert np.array_equal(decode(d, blk.rows, PERIODIC), want)


def test_g_requires_sparse_input():
    with pytest.raises(PreconditionError):
        g1(2, XOR)


def test_partial_sparse_and_dispatch():
    N = lambda n: n % 2 == 0
    assert partial_sparse(N)(3, XOR).text == XOR.text
    assert partial_sparse(N)(2, XOR).text == sparsify(2, XOR).text
    assert g_dispatch(1, N)(2, XOR).text == sparsify(2, XOR).text
    assert g_dispatch(1, N)(3, XOR).text == g1(3, sparsify(3, XOR)).text


def test_compose_transform_order():
    G = compose_transform(SPARSE, SPARSE)
    assert G(1, XOR).text == sparsify(1, sparsify(1, XOR)).text


def test_sparse_oracle_sound_on_trajectory():
    n = 2
    host, mp = sparsify_with_map(n, XOR)
    r = rule_of(host)
    orc = sparse_oracle(host)
    d = sparse_descriptor(n, XOR, host, mp)
    blk = run(r, d.encode_cells(np.array([1, 0, 1, 1], dtype=np.uint64)), 20, boundary=PERIODIC)
    rows = blk.rows
    W = rows.shape[1]
    for t in range(rows.shape[0]):
        for i in range(W):
            tri = [int(rows[t, (i - 1) % W]), int(rows[t, i]), int(rows[t, (i + 1) % W])]
            for delta in (-1, 0, 1):
                t2 = list(tri)
                t2[delta + 1] = 0
                out = r.apply(*t2)
                if out:
                    assert not orc(np.array([out], dtype=np.uint64), delta)[0]


def test_l_literal_small():
    assert l_set(1).members == {(0, 0)}
    assert l_set(2).members == {(0, 0), (-1, 1), (0, 1), (1, 1)}
    with pytest.raises(ParameterError):
        l_set(0)


@pytest.mark.parametrize("n", [3, 5, 16, 33, 64])
def test_l_properties(n):
    L = l_set(n)
    assert all((i, n - 1) in L.members for i in range(-n + 1, n))
    assert max(L.column_counts().values()) <= column_bound(n)
    assert len(L.eta_rows) == n and len(L.eta_rows[0]) == 2 * n - 1


def test_l_rule_on_cells():
    assert l_rule(2, (None, (0, 0), None)) == (0, 1)
    assert l_rule(3, (None, None, None)) is None
