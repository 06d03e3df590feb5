from __future__ import annotations

import numpy as np
import pytest

from sparseca.core import PERIODIC, TrajectoryBlock, run, xor_rule
from sparseca.errors import LengthError
from sparseca.interp import rule_of
from sparseca.programs import builtin_program
from sparseca.sim import (SimulationDescriptor, audit_overlap, audit_parents, audit_rigidity,
                          compose_sim, decode, encode, find_macrocells, window)
from sparseca.transforms import sparse_descriptor, sparsify, sparsify_with_map

XOR = builtin_program("xor")


@pytest.fixture(scope="module")
def level2():
    host, mp = sparsify_with_map(2, XOR)
    return rule_of(host), sparse_descriptor(2, XOR, host, mp)


def test_window_periodic_wraps():
    rows = np.arange(12).reshape(2, 6)
    assert window(rows, 5, 0, 2, 2, PERIODIC).tolist() == [[5, 0], [11, 6]]
    assert window(rows, 5, 0, 2, 1, "blank").tolist() == [[5, 0]]


def test_encode_places_bases(level2):
    _, d = level2
    host = encode(d, np.array([1, 0, 1], dtype=np.uint64))
    assert host.size == 3 * d.Q
    assert host[0] != 0 and host[d.Q] == 0 and host[2 * d.Q] != 0
    assert np.count_nonzero(host) == 2


def test_decode_shape_check(level2):
    _, d = level2
    with pytest.raises(LengthError):
        decode(d, np.zeros((7, 10), dtype=np.uint64))


def test_find_macrocells_lattice(level2):
    rule, d = level2
    blk = run(rule, d.encode_cells(np.array([1, 1, 0, 1], dtype=np.uint64)), 2 * d.U - 1,
              boundary=PERIODIC)
    anchors = find_macrocells(d, blk, lattice=(0, 0))
    assert (0, 0) in anchors and all(i % d.Q == 0 and t % d.U == 0 for i, t in anchors)


def test_weak_rigidity_flags_forged_cell(level2):
    rule, d = level2
    cells = np.array([1, 0, 0, 0, 0, 0], dtype=np.uint64)
    blk = run(rule, d.encode_cells(cells), 2 * d.U - 1, boundary=PERIODIC)
    assert audit_rigidity(d, rule, xor_rule(), blk, "weak") == []
    forged = np.array(blk.rows)
    forged[d.U, 3 * d.Q] = d.encode_cells(np.array([1], dtype=np.uint64))[0]
    bad = audit_rigidity(d, rule, xor_rule(), TrajectoryBlock(forged, boundary=PERIODIC), "weak")
    assert len(bad) == 1 and bad[0].i == 3 * d.Q


def test_overlap_modes():
    d = SimulationDescriptor(4, 30, (0, 0))
    assert len(audit_overlap(d, [(0, 0), (3, 10)])) == 1
    assert audit_overlap(d, [(0, 0), (4, 0), (0, 30)]) == []
    assert len(audit_overlap(d, [(0, 0), (2, 19)], "composed")) == 1
    with pytest.raises(ValueError):
        audit_overlap(d, [], "other")


def test_composed_descriptor_decodes():
    inner_host = sparsify(1, XOR)
    outer_host, mp = sparsify_with_map(1, inner_host)
    comp = compose_sim(sparse_descriptor(1, inner_host, outer_host, mp),
                       sparse_descriptor(1, XOR))
    assert comp.Q == 9 and comp.U == 9
    cells = np.array([1, 0, 1, 1, 0], dtype=np.uint64)
    blk = run(rule_of(outer_host), comp.encode_cells(cells), 3 * comp.U - 1, boundary=PERIODIC)
    want = run(xor_rule(), cells, 2, boundary=PERIODIC).rows
    assert np.array_equal(decode(comp, blk.rows, PERIODIC), want)


def test_parents_audit_runs(level2):
    rule, d = level2
    cells = np.zeros(12, dtype=np.uint64)
    cells[6] = 1
    blk = run(rule, d.encode_cells(cells), 5 * d.U - 1)
    assert audit_parents([d], blk, d.Q, d.U) == []
    assert audit_parents.last_checked > 0
