"""Simulation quintuples (Q, U, base, C, pi), encoding, decoding and audits.

A descriptor decides for a Q x U host pattern whether it is a macro-cell
(``in_c``) and which target state it represents (``state``).  Patterns are
numpy arrays indexed [t, i] with t growing upward in time.  Descriptors may
override ``mask``/``values`` with vectorized versions; the generic ones
extract every window.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import (BLANK_PADDED, PERIODIC, CellGraph, FieldLayout, LocalRule, TrajectoryBlock,
                   Violation, build_graphs, demanding_oracle_for, reach_forward, report_lines,
                   state_dtype, windows)
from .errors import LengthError, ParameterError, PreconditionError


def window(rows: np.ndarray, i: int, t: int, Q: int, U: int, boundary: str) -> np.ndarray:
    """The U x Q host pattern with lower-left corner at column i, row t."""
    T, W = rows.shape
    if boundary == PERIODIC:
        cols = np.arange(i, i + Q) % W
        return rows[t:t + U][:, cols]
    out = np.zeros((U, Q), dtype=rows.dtype)
    lo, hi = max(i, 0), min(i + Q, W)
    if lo < hi:
        out[:, lo - i:hi - i] = rows[t:t + U, lo:hi]
    return out


@dataclass
class SimulationDescriptor:
    Q: int
    U: int
    base: tuple
    host_layout: FieldLayout | None = None
    target_layout: FieldLayout | None = None
    name: str = "sim"

    # ------------------------------------------------------------ contract
    def in_c(self, pattern: np.ndarray) -> bool:
        raise NotImplementedError

    def state(self, pattern: np.ndarray) -> int:
        raise NotImplementedError

    def encode_cells(self, cells: np.ndarray) -> np.ndarray:
        raise PreconditionError(f"descriptor {self.name} has no encoder")

    # ----------------------------------------------------------- scanning
    def candidates(self, rows: np.ndarray, boundary: str) -> np.ndarray:
        """Boolean (T, W) necessary condition for a window origin; default all."""
        T, W = rows.shape
        m = np.zeros((T, W), dtype=bool)
        m[:max(0, T - self.U + 1)] = True
        return m

    def mask(self, rows: np.ndarray, boundary: str) -> np.ndarray:
        cand = self.candidates(rows, boundary)
        out = np.zeros_like(cand)
        for t, i in zip(*np.nonzero(cand)):
            if t + self.U <= rows.shape[0]:
                out[t, i] = self.in_c(window(rows, int(i), int(t), self.Q, self.U, boundary))
        return out

    def values(self, rows: np.ndarray, boundary: str, origins) -> list[int]:
        return [self.state(window(rows, i, t, self.Q, self.U, boundary)) for i, t in origins]

    def decode_pattern(self, pattern: np.ndarray) -> int:
        return self.state(pattern) if self.in_c(pattern) else 0

    @property
    def dims(self) -> tuple:
        return (self.Q, self.U)


# ---------------------------------------------------------------- sparse

@dataclass
class SparseSimulation(SimulationDescriptor):
    """Level-n sparse simulation: macro-cells are M x M with a base at (0, 0)."""
    n: int = 1
    host: object = None
    target: object = None
    mapping: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def _base_ok(self, states: np.ndarray) -> np.ndarray:
        lay = self.host_layout
        s = np.asarray(states).astype(np.uint64)
        return (lay.get(s, "Live") == 1) & (lay.get(s, "Kind") == 1) & (lay.get(s, "Count") == 0)

    def payload(self, states) -> np.ndarray:
        s = np.asarray(states).astype(np.uint64)
        out = np.zeros(s.shape, dtype=np.uint64)
        tl, hl = self.target_layout, self.host_layout
        for f in tl.fields:
            v = hl.get(s, self.mapping.get(f.name, f.name)).astype(np.uint64)
            out |= v << np.uint64(tl.K - f.offset - f.width)
        return out

    def in_c(self, pattern):
        return bool(self._base_ok(pattern[0, 0]))

    def state(self, pattern):
        return int(self.payload(pattern[0, 0])) if self.in_c(pattern) else 0

    def candidates(self, rows, boundary):
        m = self._base_ok(rows)
        m[max(0, rows.shape[0] - self.U + 1):] = False
        return m

    def mask(self, rows, boundary):
        return self.candidates(rows, boundary)

    def values(self, rows, boundary, origins):
        return [int(self.payload(rows[t, i % rows.shape[1]])) for i, t in origins]

    def encode_cells(self, cells):
        cells = np.asarray(cells).astype(np.uint64)
        M = self.Q
        hl, tl = self.host_layout, self.target_layout
        out = np.zeros(cells.size * M, dtype=np.uint64)
        vals = {"Live": 1, "Kind": 1, "Count": 0}
        vals.update(self.extra)
        base = np.uint64(hl.pack(**vals))
        for f in tl.fields:
            v = tl.get(cells, f.name).astype(np.uint64)
            hf = self.mapping.get(f.name, f.name)
            contrib = v << np.uint64(hl.shift(hf))
            out[::M] |= contrib
        out[::M] = np.where(cells != 0, out[::M] | base, np.uint64(0))
        return out


def sparse_simulation(n: int, host, target, mapping: dict, extra: dict) -> SparseSimulation:
    M = 2 * n + 1
    return SparseSimulation(M, M, (0, 0), host.layout, target.layout, f"sparse{n}",
                            n=n, host=host, target=target, mapping=dict(mapping),
                            extra=dict(extra))


# -------------------------------------------------------------- composed

@dataclass
class ComposedSimulation(SimulationDescriptor):
    """Outer S (host -> middle) followed by inner S' (middle -> target)."""
    outer: SimulationDescriptor = None
    inner: SimulationDescriptor = None

    def _decode_grid(self, rows, boundary, i, t):
        S, S2 = self.outer, self.inner
        grid = np.zeros((S2.U, S2.Q), dtype=object)
        origins = [(i + S.Q * x, t + S.U * y) for y in range(S2.U) for x in range(S2.Q)]
        T, W = rows.shape
        inside = [(a, b) for a, b in origins if b + S.U <= T]
        if len(inside) < len(origins):
            return None
        cm = self._outer_mask(rows, boundary)
        W = rows.shape[1]
        vals = []
        for a, b in origins:
            col = a % W if boundary == PERIODIC else a
            ok = 0 <= col < W and cm[b, col]
            vals.append(S.values(rows, boundary, [(col, b)])[0] if ok else 0)
        arr = np.array(vals, dtype=state_dtype(S2.host_layout.K if S2.host_layout else 64))
        return arr.reshape(S2.U, S2.Q)

    def _outer_mask(self, rows, boundary):
        key = (id(rows), boundary)
        if getattr(self, "_mask_key", None) != key:
            self._mask_cache = self.outer.mask(rows, boundary)
            self._mask_key = key
        return self._mask_cache

    def candidates(self, rows, boundary):
        S, S2 = self.outer, self.inner
        cm = self._outer_mask(rows, boundary)
        T, W = rows.shape
        dx, dy = S.Q * S2.base[0], S.U * S2.base[1]
        out = np.zeros((T, W), dtype=bool)
        ts, is_ = np.nonzero(cm)
        for t, i in zip(ts, is_):
            o_t, o_i = t - dy, i - dx
            if boundary == PERIODIC:
                o_i %= W
            if 0 <= o_t and o_t + self.U <= T and 0 <= o_i < W:
                out[o_t, o_i] = True
        return out

    def mask(self, rows, boundary):
        cand = self.candidates(rows, boundary)
        out = np.zeros_like(cand)
        for t, i in zip(*np.nonzero(cand)):
            g = self._decode_grid(rows, boundary, int(i), int(t))
            out[t, i] = g is not None and self.inner.in_c(g)
        return out

    def values(self, rows, boundary, origins):
        res = []
        for i, t in origins:
            g = self._decode_grid(rows, boundary, i, t)
            res.append(0 if g is None else self.inner.decode_pattern(g))
        return res

    def in_c(self, pattern):
        rows = np.asarray(pattern)
        g = self._decode_grid(rows, BLANK_PADDED, 0, 0)
        return g is not None and self.inner.in_c(g)

    def state(self, pattern):
        rows = np.asarray(pattern)
        g = self._decode_grid(rows, BLANK_PADDED, 0, 0)
        return 0 if g is None else self.inner.decode_pattern(g)

    def encode_cells(self, cells):
        return self.outer.encode_cells(self.inner.encode_cells(cells))


def compose_sim(S: SimulationDescriptor, S2: SimulationDescriptor) -> ComposedSimulation:
    if S.target_layout is not None and S2.host_layout is not None and \
            S.target_layout.K != S2.host_layout.K:
        raise ParameterError("outer target layout does not match inner host layout")
    a, b = S.base
    a2, b2 = S2.base
    return ComposedSimulation(S.Q * S2.Q, S.U * S2.U, (a + S.Q * a2, b + S.U * b2),
                              S.host_layout, S2.target_layout, f"{S.name}*{S2.name}",
                              outer=S, inner=S2)


# ------------------------------------------------------------ encode/decode

def encode(d: SimulationDescriptor, target_cells) -> np.ndarray:
    cells = np.asarray(getattr(target_cells, "cells", target_cells))
    return d.encode_cells(cells)


def decode(d: SimulationDescriptor, rows, boundary: str = BLANK_PADDED,
           origin: tuple = (0, 0)) -> np.ndarray:
    """Blockwise pi over the lattice origin + (Q x, U y)."""
    rows = np.asarray(getattr(rows, "rows", rows))
    T, W = rows.shape
    i0, t0 = origin
    if (T - t0) % d.U or (W - i0) % d.Q:
        raise LengthError(f"block {W}x{T} is not a multiple of {d.Q}x{d.U}")
    nt, ni = (T - t0) // d.U, (W - i0) // d.Q
    m = d.mask(rows, boundary)
    origins = [(i0 + d.Q * x, t0 + d.U * y) for y in range(nt) for x in range(ni)]
    good = [(i, t) for i, t in origins if m[t, i]]
    vals = dict(zip(good, d.values(rows, boundary, good)))
    K = d.target_layout.K if d.target_layout is not None else 64
    out = np.zeros((nt, ni), dtype=state_dtype(K))
    for y in range(nt):
        for x in range(ni):
            out[y, x] = vals.get((i0 + d.Q * x, t0 + d.U * y), 0)
    return out


def find_macrocells(d: SimulationDescriptor, block, lattice: tuple | None = None) -> list:
    """All window origins (i, t) whose Q x U window is a macro-cell."""
    rows = np.asarray(getattr(block, "rows", block))
    boundary = getattr(block, "boundary", BLANK_PADDED)
    if rows.ndim != 2:
        raise LengthError("find_macrocells needs a single (T, W) block")
    m = d.mask(rows, boundary)
    ts, is_ = np.nonzero(m)
    out = [(int(i), int(t)) for t, i in zip(ts, is_)]
    if lattice is not None:
        (i0, t0) = lattice
        out = [(i, t) for i, t in out if (i - i0) % d.Q == 0 and (t - t0) % d.U == 0]
    return sorted(out, key=lambda a: (a[1], a[0]))


# ------------------------------------------------------------------ audits

def _anchor_states(d, rows, boundary, anchors) -> dict:
    return dict(zip(anchors, d.values(rows, boundary, anchors)))


def _neighbor_origin(d, rows, boundary, i, t, delta):
    W = rows.shape[1]
    j = i + delta * d.Q
    if boundary == PERIODIC:
        j %= W
    return (j, t - d.U)


def audit_rigidity(d: SimulationDescriptor, host_rule: LocalRule | None, target_rule: LocalRule,
                   block, variant: str = "weak", anchors=None) -> list[Violation]:
    """Check every decodable non-blank macro-cell against its predecessors.

    For a macro-cell at (i, t) whose predecessor row lies in the block, the
    decoded states at (i + delta Q, t - U) (blank where no macro-cell is
    found) must produce it: exactly (rigid, strong) or with some of them
    replaced by blank (weak).
    """
    rows = np.asarray(block.rows)
    boundary = block.boundary
    if anchors is None:
        anchors = find_macrocells(d, block)
    aset = set(anchors)
    states = _anchor_states(d, rows, boundary, anchors)
    out = []
    checked = 0
    for (i, t) in anchors:
        s = states[(i, t)]
        if s == 0 or t - d.U < 0:
            continue
        nbrs = []
        for delta in (-1, 0, 1):
            o = _neighbor_origin(d, rows, boundary, i, t, delta)
            if o in aset:
                nbrs.append(states[o])
            else:
                nbrs.append(0)
        checked += 1
        if variant == "weak":
            ok = False
            for mask in range(8):
                c = [0 if mask >> k & 1 else nbrs[k] for k in range(3)]
                if target_rule.apply(*c) == s:
                    ok = True
                    break
        else:
            ok = target_rule.apply(*nbrs) == s
        if not ok:
            out.append(Violation(f"rigidity-{variant}", i, t,
                                 f"decoded={s} predecessors={tuple(int(x) for x in nbrs)}"))
    audit_rigidity.last_checked = checked
    return out


audit_rigidity.last_checked = 0


def base_cell(d: SimulationDescriptor, origin, W: int, boundary: str) -> tuple:
    i, t = origin
    j = i + d.base[0]
    if boundary == PERIODIC:
        j %= W
    return (j, t + d.base[1])


def audit_connecting(d: SimulationDescriptor, host_rule: LocalRule, target_rule: LocalRule,
                     block, anchors=None, graph: CellGraph | None = None,
                     target_oracle=None, host_oracle=None) -> list[Violation]:
    """Adjacent decoded cells must have host paths between their bases."""
    rows = np.asarray(block.rows)
    boundary = block.boundary
    T, W = rows.shape
    if anchors is None:
        anchors = find_macrocells(d, block)
    aset = set(anchors)
    states = _anchor_states(d, rows, boundary, anchors)
    if graph is None:
        graph = build_graphs(block, host_rule, host_oracle)
    orc = demanding_oracle_for(target_rule, target_oracle)
    out = []
    checked = 0
    reach_cache: dict = {}
    for (i, t) in anchors:
        s = states[(i, t)]
        if s == 0:
            continue
        for delta in (-1, 0, 1):
            o = _neighbor_origin(d, rows, boundary, i, t, delta)
            if o not in aset or states[o] == 0:
                continue
            if not bool(np.asarray(orc(np.array([s], dtype=target_rule.dtype), delta))[0]):
                continue
            checked += 1
            src = base_cell(d, o, W, boundary)
            dst = base_cell(d, (i, t), W, boundary)
            if not (0 <= dst[1] < T and 0 <= src[1] < T):
                continue
            reach = reach_cache.get(src)
            if reach is None:
                reach = reach_cache[src] = reach_forward(graph, src[0], src[1], "strong",
                                                         t_stop=src[1] + 2 * d.U)
            if not reach[dst[1], dst[0]]:
                out.append(Violation("connecting", i, t,
                                     f"no host path from base {src} to base {dst}"))
    audit_connecting.last_checked = checked
    return out


audit_connecting.last_checked = 0


def audit_overlap(d: SimulationDescriptor, anchors, mode: str = "universal") -> list[Violation]:
    """Distinct anchors that overlap more than the simulation allows."""
    pts = sorted(set(anchors), key=lambda a: (a[1], a[0]))
    out = []
    if mode == "universal":
        wi, wt = d.Q, d.U - 3 * d.Q
        close = lambda di, dt: di < wi and dt < wt
    elif mode == "composed":
        close = lambda di, dt: 3 * di < 2 * d.Q and 3 * dt < 2 * d.U
    else:
        raise ValueError(f"unknown overlap mode {mode!r}")
    for k, (i, t) in enumerate(pts):
        for (j, s) in pts[k + 1:]:
            if s - t >= d.U:
                break
            if close(abs(i - j), abs(t - s)):
                out.append(Violation("overlap", j, s, f"anchor ({i},{t}) overlaps ({j},{s})"))
    return out


def audit_parents(chain: list, block, B: int, W_: int, lattice_only: bool = False) -> list[Violation]:
    """Every non-blank cell needs a top-level anchor below and beside it.

    ``chain[-1]`` is the level-n composed descriptor; B and W_ are B_n and
    W_n.  Cells too close to the block edge to be judged are skipped.
    """
    d = chain[-1]
    rows = np.asarray(block.rows)
    T, Wd = rows.shape
    anchors = find_macrocells(d, block)
    bases = [base_cell(d, a, Wd, block.boundary) for a in anchors]
    out = []
    checked = 0
    ts, is_ = np.nonzero(rows != 0)
    for t, i in zip(ts, is_):
        t, i = int(t), int(i)
        if t < 3 * W_ or i < 4 * B or i + 3 * B >= Wd:
            continue
        checked += 1
        if not any(i - 4 * B <= bi <= i + 3 * B and t - 3 * W_ <= bt <= t for bi, bt in bases):
            out.append(Violation("parents", i, t, "no anchor within the parent window"))
    audit_parents.last_checked = checked
    return out


audit_parents.last_checked = 0


def report(kind: str, violations, checked: int) -> str:
    return "\n".join(report_lines(kind, violations, checked))
