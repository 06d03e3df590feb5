"""State representation, stepping, trajectory checks and cell graphs.

Rows are numpy arrays of packed cell states.  A state is a K-bit integer
whose fields are laid out most-significant first; the blank state is 0.
Layouts up to 64 bits use ``uint64`` rows, wider layouts fall back to
object arrays of Python ints.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import CapacityError, LengthError, QuiescenceError

BLANK_PADDED = "blank"
PERIODIC = "periodic"
BOUNDARIES = (BLANK_PADDED, PERIODIC)

DETERMINISTIC = "det"
TILDE = "tilde"
HAT = "hat"
MODES = (DETERMINISTIC, TILDE, HAT)

# exhaustive demanding scans enumerate 3 * 2^(2K) triples
EXHAUSTIVE_DEMANDING_K = 8
UNIVERSE_DEMANDING_K = 16
UNIVERSE_CAP = 1024
DENSE_TABLE_BITS = 24


# ---------------------------------------------------------------- layouts

@dataclass(frozen=True)
class Field:
    name: str
    kind: str  # bool | num | enum | bits
    width: int
    offset: int
    max_value: int | None = None
    labels: tuple[str, ...] = ()
    length: int | None = None


def field_width(kind: str, max_value: int | None = None,
                labels: Sequence[str] = (), length: int | None = None) -> int:
    if kind == "bool":
        return 1
    if kind == "num":
        if max_value is None or max_value < 1:
            raise ValueError(f"num field needs max value >= 1, got {max_value}")
        return max(1, math.ceil(math.log2(max_value + 1)))
    if kind == "enum":
        if len(labels) < 2:
            raise ValueError("enum field needs at least two labels")
        return max(1, math.ceil(math.log2(len(labels))))
    if kind == "bits":
        if length is None or length < 1:
            raise ValueError("bits field needs length >= 1")
        return length
    raise ValueError(f"unknown field kind {kind!r}")


class FieldLayout:
    """Ordered named bit fields packed into one K-bit state."""

    def __init__(self, specs: Iterable[tuple], name: str = ""):
        fields: list[Field] = []
        offset = 0
        seen = set()
        for spec in specs:
            if isinstance(spec, Field):
                fname, kind = spec.name, spec.kind
                mv, labels, length = spec.max_value, spec.labels, spec.length
            else:
                fname, kind, *rest = spec
                mv = labels = length = None
                if kind == "num":
                    mv = rest[0]
                elif kind == "enum":
                    labels = tuple(rest[0])
                elif kind == "bits":
                    length = rest[0]
            if fname in seen:
                raise ValueError(f"duplicate field {fname!r}")
            seen.add(fname)
            w = field_width(kind, mv, labels or (), length)
            fields.append(Field(fname, kind, w, offset, mv, tuple(labels or ()), length))
            offset += w
        self.fields: tuple[Field, ...] = tuple(fields)
        self.K = offset
        self.name = name
        self._by_name = {f.name: f for f in self.fields}

    def __repr__(self) -> str:
        inner = ", ".join(f"{f.name}:{f.width}" for f in self.fields)
        return f"FieldLayout({self.name or '-'}; K={self.K}; {inner})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FieldLayout) and self.fields == other.fields

    def __hash__(self) -> int:
        return hash(self.fields)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def field(self, name: str) -> Field:
        return self._by_name[name]

    def shift(self, name: str) -> int:
        f = self._by_name[name]
        return self.K - f.offset - f.width

    def mask(self, name: str) -> int:
        return (1 << self._by_name[name].width) - 1

    def get(self, state, name: str):
        """Read a field from an int state or a numpy array of states."""
        sh, m = self.shift(name), self.mask(name)
        if isinstance(state, np.ndarray) and state.dtype == np.uint64:
            return ((state >> np.uint64(sh)) & np.uint64(m)).astype(np.int64)
        return (state >> sh) & m

    def set(self, state: int, name: str, value: int) -> int:
        sh, m = self.shift(name), self.mask(name)
        return (state & ~(m << sh)) | ((int(value) & m) << sh)

    def pack(self, **values) -> int:
        s = 0
        for k, v in values.items():
            s = self.set(s, k, v)
        return s

    def pack_vec(self, values: dict[str, np.ndarray]) -> np.ndarray:
        """Pack per-field int arrays into uint64 states."""
        out = None
        for k, v in values.items():
            sh, m = self.shift(k), self.mask(k)
            part = (np.asarray(v).astype(np.uint64) & np.uint64(m)) << np.uint64(sh)
            out = part if out is None else out | part
        return out

    def unpack(self, state: int) -> dict[str, int]:
        return {f.name: self.get(state, f.name) for f in self.fields}

    def label(self, name: str, index: int) -> str:
        f = self._by_name[name]
        return f.labels[index] if index < len(f.labels) else f"#{index}"

    def format(self, state: int) -> str:
        parts = []
        for f in self.fields:
            v = self.get(state, f.name)
            parts.append(f"{f.name}={self.label(f.name, v) if f.kind == 'enum' else v}")
        return " ".join(parts)


def state_dtype(K: int):
    return np.uint64 if K <= 64 else object


def as_row_array(cells, K: int) -> np.ndarray:
    arr = np.array([int(c) for c in cells] if not isinstance(cells, np.ndarray) else cells,
                   dtype=state_dtype(K))
    return arr


# ------------------------------------------------------------------ rules

class LocalRule:
    """A radius-r local function on packed states.

    ``fn`` maps 2r+1 ints to an int; ``vec`` (optional) maps 2r+1 equally
    shaped arrays to an array.  When only ``fn`` is given, array calls go
    through a memo: a dense table when (2r+1)K <= 24, a dict otherwise.
    ``hook(x, y, boundary)`` is an optional row-level post-pass applied after
    the local image (used by the universal simulator's computation latch).
    """

    def __init__(self, K: int, fn: Callable[..., int] | None = None, *,
                 vec: Callable[..., np.ndarray] | None = None, radius: int = 1,
                 origin: str = "builtin", name: str = "", program=None,
                 hook: Callable | None = None, demanding_oracle=None,
                 layout: FieldLayout | None = None):
        if fn is None and vec is None:
            raise ValueError("rule needs fn or vec")
        self.K = K
        self.radius = radius
        self.origin = origin
        self.name = name
        self.program = program
        self.hook = hook
        self.demanding_oracle = demanding_oracle
        self.layout = layout
        self._fn = fn
        self._vec = vec
        self._table: np.ndarray | None = None
        self._memo: dict = {}
        self._demanding_cache = None
        width = (2 * radius + 1) * K
        if vec is None and width <= DENSE_TABLE_BITS:
            self._table = np.full(1 << width, -1, dtype=np.int64)
        blank = self.apply(*([0] * (2 * radius + 1)))
        if blank != 0:
            raise QuiescenceError(f"rule {name or origin} maps blank neighborhood to {blank}")

    def __repr__(self) -> str:
        return f"LocalRule({self.name or self.origin}, K={self.K}, r={self.radius})"

    @property
    def dtype(self):
        return state_dtype(self.K)

    def apply(self, *cells: int) -> int:
        if len(cells) != 2 * self.radius + 1:
            raise ValueError(f"expected {2 * self.radius + 1} cells")
        if self._fn is not None:
            key = tuple(int(c) for c in cells)
            hit = self._memo.get(key)
            if hit is None:
                hit = int(self._fn(*key))
                self._memo[key] = hit
            return hit
        arrs = [np.array([c], dtype=self.dtype) for c in cells]
        return int(self._vec(*arrs)[0])

    def apply_vec(self, *arrays: np.ndarray) -> np.ndarray:
        if self._vec is not None:
            return self._vec(*arrays)
        shape = np.shape(arrays[0])
        if self._table is not None:
            idx = np.zeros(shape, dtype=np.int64)
            for a in arrays:
                idx = (idx << self.K) | np.asarray(a).astype(np.int64)
            vals = self._table[idx]
            missing = vals < 0
            if missing.any():
                for key in np.unique(idx[missing]):
                    cells = []
                    k = int(key)
                    for _ in arrays:
                        cells.append(k & ((1 << self.K) - 1))
                        k >>= self.K
                    self._table[key] = self.apply(*reversed(cells))
                vals = self._table[idx]
            return vals.astype(self.dtype)
        flat = [np.asarray(a).reshape(-1) for a in arrays]
        out = np.empty(flat[0].shape[0], dtype=self.dtype)
        if self.dtype == np.uint64:
            stacked = np.stack(flat, axis=1)
            uniq, inv = np.unique(stacked, axis=0, return_inverse=True)
            res = np.array([self.apply(*(int(v) for v in row)) for row in uniq], dtype=self.dtype)
            out[:] = res[inv.reshape(-1)]
        else:
            for j in range(out.shape[0]):
                out[j] = self.apply(*(int(f[j]) for f in flat))
        return out.reshape(shape)


def _xor_vec(a, b, c):
    return a ^ b ^ c


def xor_rule() -> LocalRule:
    return LocalRule(1, lambda a, b, c: a ^ b ^ c, vec=_xor_vec, name="xor",
                     layout=FieldLayout([("B", "bool")], "xor"))


def identity_rule(K: int = 1) -> LocalRule:
    return LocalRule(K, lambda a, b, c: b, vec=lambda a, b, c: b.copy(), name="identity")


def blank_rule(K: int = 1) -> LocalRule:
    return LocalRule(K, lambda a, b, c: 0, vec=lambda a, b, c: np.zeros_like(b), name="always-blank")


# ------------------------------------------------------------------- rows

@dataclass(frozen=True)
class RowConfig:
    cells: np.ndarray
    boundary: str = BLANK_PADDED
    origin: int = 0  # index of coordinate 0 inside ``cells``

    def __post_init__(self):
        if self.boundary not in BOUNDARIES:
            raise ValueError(f"unknown boundary {self.boundary!r}")
        arr = self.cells if isinstance(self.cells, np.ndarray) else np.array(
            [int(c) for c in self.cells], dtype=np.uint64)
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @property
    def width(self) -> int:
        return int(self.cells.shape[-1])

    def at(self, i: int) -> int:
        """State at coordinate i (blank or wrapped outside the window)."""
        j = i + self.origin
        if self.boundary == PERIODIC:
            return int(self.cells[j % self.width])
        if 0 <= j < self.width:
            return int(self.cells[j])
        return 0

    def __eq__(self, other) -> bool:
        return (isinstance(other, RowConfig) and self.boundary == other.boundary
                and self.cells.shape == other.cells.shape
                and bool(np.all(self.cells == other.cells)))

    def __hash__(self) -> int:
        return hash((self.boundary, self.cells.tobytes()))


def row(cells, boundary: str = BLANK_PADDED, K: int = 1, origin: int = 0) -> RowConfig:
    """Build a row from a sequence of ints or a bit string like '0010'."""
    if isinstance(cells, str):
        cells = [int(ch) for ch in cells]
    return RowConfig(as_row_array(cells, K), boundary, origin)


def windows(cells: np.ndarray, radius: int, boundary: str) -> list[np.ndarray]:
    """Neighborhood arrays along the last axis: windows[k][..., i] = cell i+k-r."""
    out = []
    for d in range(-radius, radius + 1):
        if d == 0:
            out.append(cells)
        elif boundary == PERIODIC:
            out.append(np.roll(cells, -d, axis=-1))
        else:
            sh = np.zeros_like(cells)
            if d > 0:
                sh[..., :-d] = cells[..., d:]
            else:
                sh[..., -d:] = cells[..., :d]
            out.append(sh)
    return out


def image(rule: LocalRule, cells: np.ndarray, boundary: str = BLANK_PADDED,
          threads: int = 1, blank_mask: np.ndarray | None = None) -> np.ndarray:
    """Deterministic (or hat-masked) image of a row or a stack of rows.

    ``blank_mask`` is an optional uint8 array of subset codes: bit k blanks
    neighborhood position k (0 = leftmost) before the local rule is applied.
    """
    wins = windows(cells, rule.radius, boundary)
    if blank_mask is not None:
        wins = [np.where((blank_mask >> k) & 1 == 1, np.zeros_like(w), w)
                for k, w in enumerate(wins)]
    n = cells.shape[-1]
    if threads <= 1 or n < 2 * threads:
        y = rule.apply_vec(*wins)
    else:
        bounds = np.linspace(0, n, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(
                lambda lo_hi: rule.apply_vec(*(w[..., lo_hi[0]:lo_hi[1]] for w in wins)),
                zip(bounds[:-1], bounds[1:])))
        y = np.concatenate(parts, axis=-1)
    y = np.asarray(y, dtype=rule.dtype)
    if rule.hook is not None:
        y = rule.hook(cells, y, boundary)
    return y


def step(rule: LocalRule, r: RowConfig, threads: int = 1) -> RowConfig:
    if r.width < 1:
        raise LengthError("row width must be >= 1")
    return RowConfig(image(rule, r.cells, r.boundary, threads), r.boundary, r.origin)


def step_word(rule: LocalRule, word) -> np.ndarray:
    """Apply the rule to a finite word; output is 2r cells shorter."""
    w = np.asarray(word if isinstance(word, np.ndarray) else [int(c) for c in word],
                   dtype=rule.dtype)
    n = w.shape[-1]
    r = rule.radius
    if n < 2 * r + 1:
        raise LengthError(f"word of length {n} shorter than {2 * r + 1}")
    parts = [w[..., k:n - 2 * r + k] for k in range(2 * r + 1)]
    return np.asarray(rule.apply_vec(*parts), dtype=rule.dtype)


def compose_shift_power(rule: LocalRule, i: int, k: int) -> LocalRule:
    """Rule of sigma^i o Phi^k: output cell j equals (Phi^k x)_{j+i}."""
    if k < 1:
        raise ValueError("k must be >= 1")
    r = rule.radius
    R = k * r + abs(i)
    lo = R + i - k * r
    hi = R + i + k * r + 1

    def vec(*cells):
        stack = np.stack([np.asarray(c, dtype=rule.dtype) for c in cells[lo:hi]], axis=-1)
        for _ in range(k):
            stack = step_word(rule, stack)
        return stack[..., 0]

    def fn(*cells):
        return int(vec(*(np.array([c], dtype=rule.dtype) for c in cells))[0])

    return LocalRule(rule.K, fn, vec=vec, radius=R, origin="composed",
                     name=f"shift{i}_power{k}({rule.name})", layout=rule.layout)


# ------------------------------------------------------------- checking

@dataclass(frozen=True)
class Violation:
    kind: str
    i: int
    t: int
    detail: str = ""

    def line(self) -> str:
        return f"VIOLATION {self.kind} at ({self.i},{self.t}) detail={self.detail}"


def report_lines(kind: str, violations: Sequence[Violation], checked: int) -> list[str]:
    if violations:
        return [v.line() for v in violations]
    return [f"OK {kind} checked={checked}"]


def _rows_of(x) -> tuple[np.ndarray, str]:
    if isinstance(x, RowConfig):
        return x.cells, x.boundary
    return np.asarray(x), BLANK_PADDED


def check_tilde_step(rule: LocalRule, x, y, t: int = 0) -> list[Violation]:
    xc, boundary = _rows_of(x)
    yc, _ = _rows_of(y)
    if xc.shape != yc.shape:
        raise ValueError("rows must have equal widths")
    img = image(rule, xc, boundary)
    bad = (yc != img) & (yc != 0)
    return [Violation("tilde-step", int(i), t, f"expected {int(img[i])} or blank, got {int(yc[i])}")
            for i in np.flatnonzero(bad)]


def hat_images(rule: LocalRule, xc: np.ndarray, boundary: str) -> list[np.ndarray]:
    n_sub = 1 << (2 * rule.radius + 1)
    return [image(rule, xc, boundary, blank_mask=np.full(xc.shape, s, dtype=np.uint8))
            for s in range(n_sub)]


def check_hat_step(rule: LocalRule, x, y, t: int = 0) -> list[Violation]:
    xc, boundary = _rows_of(x)
    yc, _ = _rows_of(y)
    if xc.shape != yc.shape:
        raise ValueError("rows must have equal widths")
    ok = np.zeros(yc.shape, dtype=bool)
    for img in hat_images(rule, xc, boundary):
        ok |= yc == img
    return [Violation("hat-step", int(i), t, f"state {int(yc[i])} not in any blanking image")
            for i in np.flatnonzero(~ok)]


# ------------------------------------------------------------ trajectories

@dataclass
class TrajectoryBlock:
    rows: np.ndarray  # shape (T, W)
    mode: str = DETERMINISTIC
    boundary: str = BLANK_PADDED
    provenance: np.ndarray | None = None  # shape (T-1, W): tilde bool mask / hat subset codes
    seed: int | None = None
    blank_prob: float = 0.0
    layout_name: str = ""

    @property
    def T(self) -> int:
        return int(self.rows.shape[0])

    @property
    def W(self) -> int:
        return int(self.rows.shape[1])


def draw_choices(rng: np.random.Generator, shape, mode: str, blank_prob: float,
                 radius: int = 1) -> np.ndarray | None:
    """Per-cell nondeterministic choices for one step.

    Tilde: boolean blanking mask.  Hat: with probability blank_prob a
    uniformly chosen nonempty subset of the neighborhood is blanked, else none.
    """
    if mode == TILDE:
        return rng.random(shape) < blank_prob
    if mode == HAT:
        n_sub = 1 << (2 * radius + 1)
        hit = rng.random(shape) < blank_prob
        codes = rng.integers(1, n_sub, size=shape)
        return np.where(hit, codes, 0).astype(np.uint8)
    return None


def advance(rule: LocalRule, cells: np.ndarray, boundary: str, mode: str,
            choice: np.ndarray | None, threads: int = 1) -> np.ndarray:
    if mode == DETERMINISTIC or choice is None:
        return image(rule, cells, boundary, threads)
    if mode == TILDE:
        y = image(rule, cells, boundary, threads)
        return np.where(choice, np.zeros_like(y), y)
    if mode == HAT:
        return image(rule, cells, boundary, threads, blank_mask=choice)
    raise ValueError(f"unknown mode {mode!r}")


def run(rule: LocalRule, init, steps: int, *, mode: str = DETERMINISTIC,
        blank_prob: float = 0.0, seed: int | None = None, boundary: str | None = None,
        threads: int = 1, layout_name: str = "") -> TrajectoryBlock:
    """Sample a trajectory block of ``steps + 1`` rows (a batch if init is 2-D).

    For a 2-D ``init`` of shape (B, W) the rows array has shape (T, B, W)
    and the choices are drawn for the whole batch at once.
    """
    if isinstance(init, RowConfig):
        cells, bnd = init.cells, init.boundary
    else:
        cells, bnd = np.asarray(init, dtype=rule.dtype), BLANK_PADDED
    if boundary is not None:
        bnd = boundary
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    rng = np.random.default_rng(seed)
    rows = np.empty((steps + 1,) + cells.shape, dtype=rule.dtype)
    rows[0] = cells
    prov = None
    if mode != DETERMINISTIC:
        prov = np.zeros((steps,) + cells.shape, dtype=bool if mode == TILDE else np.uint8)
    cur = rows[0]
    for t in range(steps):
        choice = draw_choices(rng, cells.shape, mode, blank_prob, rule.radius)
        if prov is not None:
            prov[t] = choice
        cur = advance(rule, cur, bnd, mode, choice, threads)
        rows[t + 1] = cur
    return TrajectoryBlock(rows, mode, bnd, prov, seed, blank_prob, layout_name)


def split_batch(block: TrajectoryBlock) -> list[TrajectoryBlock]:
    """Split a batched block (T, B, W) into B ordinary blocks."""
    if block.rows.ndim == 2:
        return [block]
    out = []
    for b in range(block.rows.shape[1]):
        prov = None if block.provenance is None else block.provenance[:, b].copy()
        out.append(TrajectoryBlock(block.rows[:, b].copy(), block.mode, block.boundary, prov,
                                   block.seed, block.blank_prob, block.layout_name))
    return out


def replay(rule: LocalRule, block: TrajectoryBlock, threads: int = 1) -> np.ndarray:
    """Rebuild all rows from row 0 and the recorded choices."""
    rows = np.empty_like(block.rows)
    rows[0] = block.rows[0]
    for t in range(block.T - 1):
        choice = None if block.provenance is None else block.provenance[t]
        rows[t + 1] = advance(rule, rows[t], block.boundary, block.mode, choice, threads)
    return rows


def check_trajectory(rule: LocalRule, block: TrajectoryBlock) -> list[Violation]:
    if block.T < 2:
        raise ValueError("trajectory check needs at least two rows")
    out: list[Violation] = []
    for t in range(1, block.T):
        x = RowConfig(block.rows[t - 1], block.boundary)
        y = RowConfig(block.rows[t], block.boundary)
        if block.mode == DETERMINISTIC:
            img = image(rule, x.cells, x.boundary)
            out += [Violation("det-step", int(i), t, f"expected {int(img[i])}, got {int(y.cells[i])}")
                    for i in np.flatnonzero(img != y.cells)]
        elif block.mode == TILDE:
            out += check_tilde_step(rule, x, y, t)
        else:
            out += check_hat_step(rule, x, y, t)
    return out


# ------------------------------------------------------------- demanding

class DemandingTable:
    """Exact demanding sets by enumerating all triples (small K only)."""

    def __init__(self, rule: LocalRule):
        if rule.radius != 1:
            raise CapacityError("demanding scans are defined for radius-1 rules")
        if rule.K > EXHAUSTIVE_DEMANDING_K:
            raise CapacityError(f"K={rule.K} exceeds exhaustive demanding threshold "
                                f"{EXHAUSTIVE_DEMANDING_K}")
        n = 1 << rule.K
        grid = np.arange(n, dtype=rule.dtype)
        u, v = np.meshgrid(grid, grid, indexing="ij")
        u, v = u.reshape(-1), v.reshape(-1)
        z = np.zeros_like(u)
        self.table = {}
        for delta, triple in ((-1, (z, u, v)), (0, (u, z, v)), (1, (u, v, z))):
            img = rule.apply_vec(*triple).astype(np.int64)
            reachable = np.zeros(n, dtype=bool)
            reachable[img] = True
            self.table[delta] = ~reachable

    def __call__(self, states, delta: int):
        s = np.asarray(states).astype(np.int64)
        return self.table[delta][s]


class UniverseDemanding:
    """Demanding relative to a finite universe of candidate states.

    A state is reported delta-demanding when no triple drawn from the
    universe, with its delta component blank, maps to it.  This is exact
    when the universe contains every state that can occur in a preimage.
    """

    def __init__(self, rule: LocalRule, universe: Iterable[int]):
        uni = np.unique(np.asarray(list(universe), dtype=rule.dtype))
        if rule.K > UNIVERSE_DEMANDING_K:
            raise CapacityError(f"K={rule.K} exceeds universe demanding threshold")
        if uni.size > UNIVERSE_CAP:
            raise CapacityError(f"universe of {uni.size} states exceeds cap {UNIVERSE_CAP}")
        u, v = np.meshgrid(uni, uni, indexing="ij")
        u, v = u.reshape(-1), v.reshape(-1)
        z = np.zeros_like(u)
        self.images = {}
        for delta, triple in ((-1, (z, u, v)), (0, (u, z, v)), (1, (u, v, z))):
            self.images[delta] = np.unique(rule.apply_vec(*triple))

    def __call__(self, states, delta: int):
        s = np.asarray(states)
        return ~np.isin(s, self.images[delta])


def demanding_oracle_for(rule: LocalRule, oracle=None):
    if oracle is not None:
        return oracle
    if rule.demanding_oracle is not None:
        return rule.demanding_oracle
    if rule._demanding_cache is None:
        rule._demanding_cache = DemandingTable(rule)
    return rule._demanding_cache


def demanding(rule: LocalRule, c: int, delta: int, oracle=None) -> bool:
    if delta not in (-1, 0, 1):
        raise ValueError("delta must be -1, 0 or 1")
    if c == 0:
        return False
    orc = demanding_oracle_for(rule, oracle)
    return bool(np.asarray(orc(np.array([c], dtype=rule.dtype), delta))[0])


# ---------------------------------------------------------------- graphs

@dataclass
class CellGraph:
    """Edges of G (strong) and G' (weak) stored per target cell.

    ``weak[d][t, i]`` is true when there is an edge (t-1, i+delta) -> (t, i)
    with delta = d - 1.  Coordinates passed to the API are (i, t).
    """
    nonblank: np.ndarray
    weak: np.ndarray
    strong: np.ndarray
    boundary: str = BLANK_PADDED

    @property
    def T(self) -> int:
        return self.nonblank.shape[0]

    @property
    def W(self) -> int:
        return self.nonblank.shape[1]

    def vertex_count(self) -> int:
        return int(self.nonblank.sum())

    def edges(self, strength: str = "strong") -> list[tuple[tuple[int, int], tuple[int, int]]]:
        e = self.strong if strength == "strong" else self.weak
        out = []
        for d in range(3):
            for t, i in zip(*np.nonzero(e[d])):
                src = int(i) + d - 1
                if self.boundary == PERIODIC:
                    src %= self.W
                out.append(((src, int(t) - 1), (int(i), int(t))))
        return out


def _shift_src(arr: np.ndarray, delta: int, boundary: str) -> np.ndarray:
    """out[..., i] = arr[..., i + delta] (blank or wrapped outside)."""
    return windows(arr, 1, boundary)[delta + 1]


def build_graphs(block: TrajectoryBlock, rule: LocalRule, oracle=None) -> CellGraph:
    rows = block.rows
    nb = rows != 0
    T, W = nb.shape
    weak = np.zeros((3, T, W), dtype=bool)
    strong = np.zeros((3, T, W), dtype=bool)
    if T > 1 and nb.any():
        orc = demanding_oracle_for(rule, oracle)
        for d, delta in enumerate((-1, 0, 1)):
            src = _shift_src(nb[:-1], delta, block.boundary)
            w = src & nb[1:]
            weak[d, 1:] = w
            if w.any():
                dem = np.zeros_like(w)
                dem[w] = np.asarray(orc(rows[1:][w], delta), dtype=bool)
                strong[d, 1:] = w & dem
    return CellGraph(nb, weak, strong, block.boundary)


def reach_forward(graph: CellGraph, i: int, t: int, strength: str = "strong",
                  t_stop: int | None = None) -> np.ndarray:
    """Boolean (T, W) array of cells reachable from (i, t) by directed paths."""
    e = graph.strong if strength == "strong" else graph.weak
    T = graph.T if t_stop is None else min(graph.T, t_stop + 1)
    reach = np.zeros((graph.T, graph.W), dtype=bool)
    reach[t, i] = True
    for s in range(t + 1, T):
        prev = reach[s - 1]
        if not prev.any():
            break
        cur = np.zeros(graph.W, dtype=bool)
        for d, delta in enumerate((-1, 0, 1)):
            cur |= e[d, s] & _shift_src(prev, delta, graph.boundary)
        reach[s] = cur
    return reach


def reach_backward(graph: CellGraph, i: int, t: int, strength: str = "strong") -> np.ndarray:
    e = graph.strong if strength == "strong" else graph.weak
    reach = np.zeros((graph.T, graph.W), dtype=bool)
    reach[t, i] = True
    for s in range(t, 0, -1):
        cur = reach[s]
        if not cur.any():
            break
        prev = np.zeros(graph.W, dtype=bool)
        for d, delta in enumerate((-1, 0, 1)):
            # edge (s-1, j+delta) -> (s, j): source index = j + delta
            prev |= _shift_src(e[d, s] & cur, -delta, graph.boundary)
        reach[s - 1] = prev
    return reach


def connected(graph: CellGraph, a: tuple[int, int], b: tuple[int, int],
              strength: str = "strong") -> bool:
    """True if a directed path joins the two cells (in either order).

    Edges always point forward in time, so at most one direction can hold.
    Coordinates are (i, t).
    """
    for i, t in (a, b):
        if not (0 <= t < graph.T and 0 <= i < graph.W) or not graph.nonblank[t, i]:
            raise LookupError(f"({i},{t}) is not a vertex")
    if a == b:
        return True
    lo, hi = (a, b) if a[1] <= b[1] else (b, a)
    if lo[1] == hi[1]:
        return False
    reach = reach_forward(graph, lo[0], lo[1], strength, t_stop=hi[1])
    return bool(reach[hi[1], hi[0]])


# --------------------------------------------------------------- sampling

def random_row(rng: np.random.Generator, width: int, K: int, density: float = 0.5) -> np.ndarray:
    """Row whose cells are nonblank with the given probability, uniform otherwise."""
    if K > 63:
        raise CapacityError("random rows need K <= 63")
    live = rng.random(width) < density
    vals = rng.integers(1, 1 << K, size=width, dtype=np.int64) if K > 0 else np.zeros(width)
    return np.where(live, vals, 0).astype(np.uint64)
