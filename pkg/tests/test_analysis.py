from __future__ import annotations

import numpy as np
import pytest

from sparseca.analysis import (Column, Line, Row, besicovitch_window, blank_density,
                               cantor_window, live_fraction, nilpotency_probe, sparsity_audit)
from sparseca.core import PERIODIC, TrajectoryBlock, blank_rule, build_graphs, identity_rule, run, xor_rule
from sparseca.errors import CapacityError, PreconditionError


def _block():
    rows = np.array([[1, 0, 0, 1], [0, 0, 1, 1], [1, 1, 1, 0]], dtype=np.uint8)
    return TrajectoryBlock(rows, boundary=PERIODIC)


def test_blank_density_targets():
    b = _block()
    rep = blank_density(b, Column(1))
    assert rep.final == pytest.approx(2 / 3)
    assert list(rep.series) == pytest.approx([1.0, 1.0, 2 / 3])
    assert blank_density(b, Row(0)).final == 0.5
    assert blank_density(b, Line(1, 1)).horizon == 3
    assert rep.csv_text().splitlines()[0] == "horizon,blank_fraction"
    with pytest.raises(PreconditionError):
        blank_density(b, Row(9))


def test_live_fraction():
    assert live_fraction(_block().rows, [0, 3], 0, 3) == pytest.approx(4 / 6)


def test_pseudometrics():
    x = np.array([1, 0, 1, 1, 0], dtype=np.uint64)
    y = np.array([1, 0, 0, 1, 0], dtype=np.uint64)
    assert besicovitch_window(x, x, 5) == 0.0
    assert besicovitch_window(x, y, 5) == pytest.approx(1 / 11)
    assert cantor_window(x, y) == 0.25
    assert cantor_window(x, x) == 0.0


def test_nilpotency():
    assert nilpotency_probe(blank_rule(), 2).certified
    v = nilpotency_probe(identity_rule(), 1)
    assert not v.certified and v.image == 1
    with pytest.raises(CapacityError):
        nilpotency_probe(xor_rule(), 20)


def test_sparsity_audit_detects_dense_column():
    rule = identity_rule()
    blk = run(rule, np.array([0, 1, 0], dtype=np.uint8), 19)
    rep = sparsity_audit(blk, 4, rule)
    assert rep.violations and rep.lines()[0].startswith("VIOLATION sparsity")
    ok = sparsity_audit(blk, 1, graph=build_graphs(blk, rule))
    assert ok.violations == [] and ok.lines()[0].startswith("OK")


def test_sparsity_audit_capacity():
    rule = identity_rule()
    blk = run(rule, np.zeros(100, dtype=np.uint8), 80)
    with pytest.raises(CapacityError):
        sparsity_audit(blk, 1, rule)
