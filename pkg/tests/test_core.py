from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sparseca.core import (BLANK_PADDED, PERIODIC, DemandingTable, FieldLayout, LocalRule,
                           build_graphs, check_hat_step, check_tilde_step, check_trajectory,
                           compose_shift_power, connected, identity_rule, image, reach_forward,
                           replay, row, run, split_batch, step, step_word, xor_rule)
from sparseca.errors import LengthError, QuiescenceError

LAYOUT = FieldLayout([("Live", "bool"), ("Count", "num", 9), ("Kind", "enum", ["A", "B", "C"]),
                      ("Tape", "bits", 3)])


def test_layout_widths():
    assert [f.width for f in LAYOUT.fields] == [1, 4, 2, 3]
    assert LAYOUT.K == 10
    with pytest.raises(ValueError):
        FieldLayout([("A", "bool"), ("A", "bool")])


@given(st.integers(0, 1), st.integers(0, 9), st.integers(0, 2), st.integers(0, 7))
def test_layout_pack_roundtrip(live, count, kind, tape):
    s = LAYOUT.pack(Live=live, Count=count, Kind=kind, Tape=tape)
    assert (LAYOUT.get(s, "Live"), LAYOUT.get(s, "Count"), LAYOUT.get(s, "Kind"),
            LAYOUT.get(s, "Tape")) == (live, count, kind, tape)


def test_xor_step_blank_padded():
    r = step(xor_rule(), row([0, 1, 0]))
    assert list(r.cells) == [1, 1, 1]


def test_xor_step_periodic():
    out = image(xor_rule(), np.array([1, 0, 0, 0], dtype=np.uint8), PERIODIC)
    assert list(out) == [1, 1, 0, 1]


def test_step_word_shrinks():
    assert list(step_word(xor_rule(), [1, 0, 0, 1])) == [1, 1]
    with pytest.raises(LengthError):
        step_word(xor_rule(), [1, 0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=8, max_size=24), st.integers(-2, 2),
       st.integers(1, 3))
def test_shift_power_matches_iteration(cells, i, k):
    rule = xor_rule()
    x = np.array(cells, dtype=np.uint8)
    want = x
    for _ in range(k):
        want = image(rule, want, PERIODIC)
    want = np.roll(want, -i)
    got = image(compose_shift_power(rule, i, k), x, PERIODIC)
    assert list(got) == list(want)


def test_threads_agree():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 2, 500).astype(np.uint8)
    assert np.array_equal(image(xor_rule(), x, PERIODIC, 1), image(xor_rule(), x, PERIODIC, 4))


def test_tilde_and_hat_checks():
    rule = xor_rule()
    x = row([1, 1, 0, 1])
    y = step(rule, x)
    assert check_tilde_step(rule, x, y) == []
    blanked = np.array(y.cells)
    blanked[1] = 0
    assert check_tilde_step(rule, x, row(blanked)) == []
    wrong = np.array(y.cells)
    wrong[1] ^= 1
    if wrong[1]:
        assert check_tilde_step(rule, x, row(wrong))
    assert check_hat_step(rule, x, y) == []


@pytest.mark.parametrize("mode", ["tilde", "hat"])
def test_nondeterministic_runs_verify_and_replay(mode):
    rule = xor_rule()
    blk = run(rule, np.array([1, 0, 1, 1, 0, 1, 0, 0], dtype=np.uint8), 12, mode=mode,
              blank_prob=0.3, seed=4, boundary=PERIODIC)
    assert check_trajectory(rule, blk) == []
    assert np.array_equal(replay(rule, blk), blk.rows)
    again = run(rule, blk.rows[0], 12, mode=mode, blank_prob=0.3, seed=4, boundary=PERIODIC)
    assert np.array_equal(again.rows, blk.rows)


def test_batched_run_splits():
    rule = identity_rule()
    init = np.array([[1, 0, 1], [0, 1, 1]], dtype=np.uint8)
    blk = run(rule, init, 3, mode="tilde", blank_prob=0.5, seed=1)
    parts = split_batch(blk)
    assert len(parts) == 2
    for p in parts:
        assert check_trajectory(rule, p) == []


def test_demanding_table_identity():
    tab = DemandingTable(identity_rule())
    s = np.array([1], dtype=np.uint8)
    assert bool(tab(s, 0)[0])
    assert not bool(tab(s, 1)[0])


def test_graph_reachability_identity_column():
    rule = identity_rule()
    blk = run(rule, np.array([0, 1, 0], dtype=np.uint8), 4, boundary=BLANK_PADDED)
    g = build_graphs(blk, rule)
    reach = reach_forward(g, 1, 0)
    assert reach[:, 1].all() and not reach[:, 0].any()
    assert connected(g, (1, 0), (1, 4))


def test_non_quiescent_rule_rejected():
    with pytest.raises(QuiescenceError):
        LocalRule(1, lambda a, b, c: 1, name="one")
