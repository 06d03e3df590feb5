from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sparseca.core import FieldLayout
from sparseca.errors import DecodeError
from sparseca.fileio import parse_trajectory, pbm_text, pgm_text, read_pnm, trajectory_text, write_atomic


@settings(max_examples=50, deadline=None)
@given(arrays(np.uint64, st.tuples(st.integers(1, 6), st.integers(1, 12)),
              elements=st.sampled_from([0, 0, 0, 1, 5, 7])))
def test_trajectory_roundtrip(rows):
    text = trajectory_text(rows, 3, "lay")
    back, K, name = parse_trajectory(text)
    assert K == 3 and name == "lay" and np.array_equal(back, rows)


def test_blank_runs_compressed():
    text = trajectory_text(np.array([[0, 0, 0, 0, 0, 1]]), 2)
    assert text.splitlines()[1] == "B*5 01"


def test_bad_files():
    with pytest.raises(DecodeError):
        parse_trajectory("")
    with pytest.raises(DecodeError):
        parse_trajectory("K=1 W=2 T=1 layout=-\n1\n")
    with pytest.raises(DecodeError):
        parse_trajectory("K=1 W=1 T=1 layout=-\n2\n")


def test_pbm_time_upward():
    rows = np.array([[1, 0], [0, 1]])
    text = pbm_text(rows)
    assert text.splitlines()[2] == "0 1"
    magic, back = read_pnm(text)
    assert magic == "P1" and np.array_equal(back, rows)


def test_pgm_field():
    lay = FieldLayout([("Live", "bool"), ("V", "num", 5)])
    rows = np.array([[lay.pack(Live=1, V=3), 0]], dtype=np.uint64)
    magic, back = read_pnm(pgm_text(rows, lay, "V"))
    assert magic == "P2" and back.tolist() == [[3, 0]]


def test_write_atomic(tmp_path):
    p = tmp_path / "x.txt"
    write_atomic(p, "a\n")
    write_atomic(p, "b\n")
    assert p.read_text() == "b\n"
    assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]
