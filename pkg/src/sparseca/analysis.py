"""Estimators over trajectory blocks: densities, pseudometrics, probes, sparsity."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .core import PERIODIC, CellGraph, LocalRule, RowConfig, TrajectoryBlock, build_graphs
from .errors import CapacityError, PreconditionError

NILPOTENCY_BUDGET = 1 << 22
SPARSITY_MAX_CELLS = 6000


# ------------------------------------------------------------------ targets

@dataclass(frozen=True)
class Column:
    i: int
    t0: int = 0
    t1: int | None = None


@dataclass(frozen=True)
class Row:
    t: int


@dataclass(frozen=True)
class Line:
    """Cells (i*m + offset, k*m) for m = 0, 1, ... (a shift-power probe)."""
    i: int
    k: int
    offset: int = 0


@dataclass
class DensityReport:
    target: object
    horizon: int
    series: np.ndarray = field(repr=False)
    final: float = 0.0

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["horizon", "blank_fraction"])
        for h, f in enumerate(self.series, start=1):
            w.writerow([h, f"{f:.6f}"])
        return buf.getvalue()

    def table(self) -> str:
        return f"{self.target} horizon={self.horizon} blank_fraction={self.final:.6f}"


def _cells_of(block: TrajectoryBlock, target) -> np.ndarray:
    rows = np.asarray(block.rows)
    T, W = rows.shape

    def col(i):
        if block.boundary == PERIODIC:
            return i % W
        if not 0 <= i < W:
            raise PreconditionError(f"column {i} outside block of width {W}")
        return i

    if isinstance(target, Column):
        t1 = T if target.t1 is None else target.t1
        if not 0 <= target.t0 < t1 <= T:
            raise PreconditionError(f"rows [{target.t0}, {t1}) outside block of height {T}")
        return rows[target.t0:t1, col(target.i)]
    if isinstance(target, Row):
        if not 0 <= target.t < T:
            raise PreconditionError(f"row {target.t} outside block of height {T}")
        return rows[target.t]
    if isinstance(target, Line):
        if target.k <= 0:
            raise PreconditionError("line probes need a positive time step")
        out = []
        for m in range(T):
            t, i = target.k * m, target.i * m + target.offset
            if t >= T:
                break
            if block.boundary != PERIODIC and not 0 <= i < W:
                break
            out.append(rows[t, i % W])
        if not out:
            raise PreconditionError("line probe starts outside the block")
        return np.array(out, dtype=rows.dtype)
    raise PreconditionError(f"unknown density target {target!r}")


def blank_density(block: TrajectoryBlock, target) -> DensityReport:
    """Fraction of blank cells along a column, row or line, with prefix series."""
    cells = _cells_of(block, target)
    blank = (cells == 0).astype(np.int64)
    series = np.cumsum(blank) / np.arange(1, blank.size + 1)
    return DensityReport(target, int(blank.size), series, float(series[-1]))


def live_fraction(rows: np.ndarray, columns, t0: int, t1: int) -> float:
    """Live fraction over a set of columns and the rows [t0, t1)."""
    sub = np.asarray(rows)[t0:t1][:, list(columns)]
    return float((sub != 0).mean()) if sub.size else 0.0


# -------------------------------------------------------------- pseudometrics

def _row_window(x, w: int) -> np.ndarray:
    if not isinstance(x, RowConfig):
        x = RowConfig(np.asarray(x, dtype=np.uint64))
    return np.array([x.at(i) for i in range(-w, w + 1)], dtype=object)


def besicovitch_window(x, y, w: int) -> float:
    """Mismatch fraction on the coordinates [-w, w]."""
    a, b = _row_window(x, w), _row_window(y, w)
    return float(np.count_nonzero(a != b)) / (2 * w + 1)


def cantor_window(x, y, w: int | None = None) -> float:
    """2^(-m) where m is the smallest |i| with x_i != y_i; 0 if none within the window."""
    if w is None:
        wx = x.width if isinstance(x, RowConfig) else len(x)
        wy = y.width if isinstance(y, RowConfig) else len(y)
        w = max(wx, wy)
    a, b = _row_window(x, w), _row_window(y, w)
    for m in range(w + 1):
        if a[w + m] != b[w + m] or a[w - m] != b[w - m]:
            return 2.0 ** -m
    return 0.0


# --------------------------------------------------------------- nilpotency

@dataclass
class NilpotencyVerdict:
    certified: bool
    depth: int
    words_checked: int
    witness: tuple | None = None
    image: int | None = None

    def __str__(self) -> str:
        if self.certified:
            return f"certified-nilpotent({self.depth}) words={self.words_checked}"
        return f"inconclusive witness={self.witness} image={self.image}"


def nilpotency_probe(rule: LocalRule, depth: int, budget: int = NILPOTENCY_BUDGET
                     ) -> NilpotencyVerdict:
    """Check that every word of length 2*depth*r + 1 maps to blank after depth steps."""
    if depth < 1:
        raise PreconditionError("depth must be positive")
    L = 2 * depth * rule.radius + 1
    n_words = (1 << rule.K) ** L
    if n_words > budget:
        raise CapacityError(f"{n_words} words exceed the probe budget {budget}")
    S = 1 << rule.K
    words = np.array(list(product(range(S), repeat=L)), dtype=rule.dtype).reshape(n_words, L)
    cur = words
    for _ in range(depth):
        n = cur.shape[1]
        r = rule.radius
        parts = [cur[:, k:n - 2 * r + k] for k in range(2 * r + 1)]
        cur = rule.apply_vec(*parts)
        if rule.hook is not None:
            raise PreconditionError("nilpotency probes need a purely local rule")
    bad = np.flatnonzero(cur[:, 0] != 0)
    if bad.size == 0:
        return NilpotencyVerdict(True, depth, n_words)
    j = int(bad[0])
    return NilpotencyVerdict(False, depth, n_words, tuple(int(v) for v in words[j]),
                             int(cur[j, 0]))


# ------------------------------------------------------------------ sparsity

@dataclass
class SparsityReport:
    n: int
    checked: int
    violations: list
    worst: float  # max over windows of |D| - (3r/n + 3)

    def lines(self) -> list[str]:
        out = [f"VIOLATION sparsity at ({i},{t}) detail=column {c} rows {a}..{b} count {k}"
               for (i, t, c, a, b, k) in self.violations]
        return out or [f"OK sparsity checked={self.checked}"]


def _reach_all(g: CellGraph) -> np.ndarray:
    """R[t, i] = cells connected to (i, t) by a directed path either way, shape (T, W, W, T)."""
    T, W = g.T, g.W
    e = g.strong
    eye = np.zeros((T, W, W, T), dtype=bool)
    for t in range(T):
        eye[t, np.arange(W), np.arange(W), t] = True
    src_idx = np.arange(W)

    def shifted(k):
        j = src_idx + k
        if g.boundary == PERIODIC:
            return j % W, np.ones(W, dtype=bool)
        ok = (j >= 0) & (j < W)
        return np.clip(j, 0, W - 1), ok

    fwd = eye.copy()
    for t in range(T - 2, -1, -1):
        for d in range(3):
            # edge (t, i) -> (t+1, j) with j = i - (d - 1)
            j, ok = shifted(-(d - 1))
            has = ok & e[d, t + 1, j]
            if has.any():
                fwd[t] |= has[:, None, None] & fwd[t + 1][j]
    back = eye
    for t in range(1, T):
        for d in range(3):
            j, ok = shifted(d - 1)
            has = ok & e[d, t]
            if has.any():
                back[t] |= has[:, None, None] & back[t - 1][j]
    return fwd | back


def sparsity_audit(block: TrajectoryBlock, n: int, rule: LocalRule | None = None,
                   graph: CellGraph | None = None, oracle=None) -> SparsityReport:
    """Check |D(r)| <= 3r/n + 3 for every cell, every column and every window.

    For a cell, the connected rows s_0 < s_1 < ... of one column violate the
    bound on some window iff n*b - 3*s_b - (n*a - 3*s_a) > 2n + 3 for a <= b.
    """
    rows = np.asarray(block.rows)
    T, W = rows.shape
    if T * W > SPARSITY_MAX_CELLS:
        raise CapacityError(f"block of {T * W} cells exceeds sparsity audit limit")
    if graph is None:
        if rule is None:
            raise PreconditionError("sparsity_audit needs a rule or a graph")
        graph = build_graphs(block, rule, oracle)
    conn = _reach_all(graph)  # (T, W, W, T)
    live = rows != 0
    flat = conn[live]  # (L, W, T)
    violations = []
    worst = float("-inf")
    if flat.shape[0]:
        cum = np.cumsum(flat, axis=2) - 1
        v = n * cum - 3 * np.arange(T)[None, None, :]
        big = np.iinfo(np.int64).max // 4
        vmin = np.minimum.accumulate(np.where(flat, v, big), axis=2)
        excess = np.where(flat, v - vmin, -big)
        peak = excess.max(axis=2)  # (L, W)
        limit = 2 * n + 3
        worst = float(peak.max() - limit) / n
        bad = np.argwhere(peak > limit)
        srcs = np.argwhere(live)
        for li, c in bad[:50]:
            t, i = (int(x) for x in srcs[li])
            col = np.flatnonzero(flat[li, c])
            bb = int(np.argmax(excess[li, c]))
            vb = v[li, c, bb]
            a = next(int(s) for s in col if v[li, c, s] == vb - peak[li, c])
            k = int(np.count_nonzero((col >= a) & (col <= bb)))
            violations.append((i, t, int(c), a, bb, k))
    return SparsityReport(n, int(live.sum()), violations, worst)
