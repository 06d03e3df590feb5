"""Program transformations: sparsification, its G_1/G_2 variants and L(n).

Every transformation maps (level, RuleProgram) to a RuleProgram.  The new
names a transformation introduces are reserved; clashing names of the input
program are renamed with a ``u<k>_`` prefix (see ``lang.program.embed``).
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ParameterError, PreconditionError
from .lang import ast as A
from .lang.builtins import Builtin, byte_cost, register
from .lang.parser import parse_ast
from .lang.program import RuleProgram, embed, from_ast, parse, validate
from .lang.values import Bits

KIND_LABELS = ("Left", "Right", "Return")  # Left first: the blank state is all zeros
SPARSE_NAMES = ("N", "Live", "Kind", "Count") + KIND_LABELS + (
    "Die", "Blank", "InputTriple", "CopyLeft", "CopyRight")


def _require_valid(p: RuleProgram):
    errs = validate(p)
    if errs:
        raise errs[0]


# ------------------------------------------------------------- sparsify

_SPARSE_HEAD = """\
num param N = {n}
bool field Live
enum field Kind in {{Left, Right, Return}}
num field Count <= 2 * N
"""

_SPARSE_BODY = """\
if InputTriple()
  __payload__()
  if Blank()
    Die()
  else
    Live <- true
    Count <- 0
    Kind <- Right
  end
elsif not Live and not Live+ and Kind- = Right and Count- < 2 * N
  CopyLeft(Right)
elsif Kind = Left and not Live+ and Kind- = Right and Count- = Count = N
  CopyLeft(Right)
elsif not Live and not Live- and Kind+ = Right and Count+ = 0
  CopyRight(Left)
elsif not Live and not Live- and Kind+ = Left and 0 < Count+ < 2 * N
  CopyRight(Left)
elsif Kind = Right and not Live- and Kind+ = Left and Count+ = Count = N
  CopyRight(Left)
elsif Kind = Return and not Live- and Kind+ = Left and N < Count+ = Count < 2 * N
  CopyRight(Left)
elsif not Live and (not Live- or N = 1 and Kind- = Left and Count- = N) and Kind+ = Right and Count+ = N
  CopyRight(Return)
elsif not Live and not Live- and Kind+ = Return and N < Count+ < 2 * N
  CopyRight(Return)
else
  Die()
end
"""


def _zero_value(d: A.FieldDecl):
    if d.kind == "bool":
        return A.BoolLit(False)
    if d.kind == "enum":
        return A.Ref(d.labels[0])
    return A.Num(0)


def _is_zero(d: A.FieldDecl):
    if d.kind == "bool":
        return A.Unary("not", A.Ref(d.name))
    if d.kind == "bits":
        return A.Call("IsZero", (A.Ref(d.name),))
    return A.Cmp(("=",), (A.Ref(d.name), _zero_value(d)))


def _conj(items):
    if not items:
        return A.BoolLit(True)
    e = items[0]
    for x in items[1:]:
        e = A.Bin("and", e, x)
    return e


def _procs_text() -> str:
    return """\
proc InputTriple()
  return (Live- or Live or Live+) and (not Live- or Kind- = Right and Count- = 2 * N) and (not Live or Kind = Return and Count = 2 * N) and (not Live+ or Kind+ = Left and Count+ = 2 * N)
end
"""


def _sparse_procs(payload_fields) -> list[A.Proc]:
    die = [A.Assign((A.Ref("Live"),), A.BoolLit(False)),
           A.Assign((A.Ref("Kind"),), A.Ref("Left")),
           A.Assign((A.Ref("Count"),), A.Num(0))]
    die += [A.Assign((A.Ref(d.name),), _zero_value(d)) for d in payload_fields]
    blank = [A.Return(_conj([_is_zero(d) for d in payload_fields]))]

    def copy(nb: str):
        body = [A.Assign((A.Ref("Live"),), A.BoolLit(True)),
                A.Assign((A.Ref("Kind"),), A.Ref("k")),
                A.Assign((A.Ref("Count"),), A.Bin("+", A.Ref("Count", nb), A.Num(1)))]
        body += [A.Assign((A.Ref(d.name),), A.Ref(d.name, nb)) for d in payload_fields]
        return tuple(body)

    triple = parse_ast(_procs_text() + "\nLive <- Live\n").procs[0]
    return [A.Proc("Die", (), tuple(die)), A.Proc("Blank", (), tuple(blank)), triple,
            A.Proc("CopyLeft", ("k",), copy("-")), A.Proc("CopyRight", ("k",), copy("+"))]


def _splice_body(template: tuple, payload_body: tuple) -> tuple:
    """Replace the ``__payload__()`` placeholder statement by the payload body."""
    out = []
    for s in template:
        if isinstance(s, A.CallStmt) and s.call.name == "__payload__":
            out.extend(payload_body)
        elif isinstance(s, A.If):
            branches = tuple((c, _splice_body(b, payload_body)) for c, b in s.branches)
            orelse = None if s.orelse is None else _splice_body(s.orelse, payload_body)
            out.append(A.If(branches, orelse, s.pos))
        else:
            out.append(s)
    return tuple(out)


def sparsify_with_map(n: int, p: RuleProgram) -> tuple[RuleProgram, dict]:
    """G_s(n, p) together with the renaming applied to p's names."""
    if n < 1:
        raise ParameterError("sparsification level must be at least 1")
    _require_valid(p)
    decls, procs, body, mapping = embed(p, SPARSE_NAMES)
    payload_fields = [d for d in decls if isinstance(d, A.FieldDecl)]
    head = parse_ast(_SPARSE_HEAD.format(n=n) + "\nLive <- Live\n")
    template = parse_ast("bool field Live\nenum field Kind in {Left, Right, Return}\n"
                         "num field Count <= 2\nnum param N = 1\n"
                         "proc __payload__()\nend\n" + _SPARSE_BODY).body
    new_body = _splice_body(template, body)
    ast = A.Program(tuple(head.decls) + tuple(decls),
                    tuple(procs) + tuple(_sparse_procs(payload_fields)), new_body)
    out = from_ast(ast, name=f"sparsify({n},{p.name or 'p'})")
    return out, mapping


def sparsify(n: int, p: RuleProgram) -> RuleProgram:
    return sparsify_with_map(n, p)[0]


def sparsify_partial(N: Callable[[int], bool], n: int, p: RuleProgram) -> RuleProgram:
    return sparsify(n, p) if N(n) else p


def _require_sparse(p: RuleProgram):
    for name in ("N", "Count", "Kind", "Live"):
        if not (p.is_field(name) or p.is_param(name)):
            raise PreconditionError(f"program is not sparsified: missing {name}")


# ------------------------------------------------------------- G_1, G_2

_G1_TAIL = """\
if Kind = Right and Count = 0
  CCount <- 1
elsif CCount > 0
  CCount <- CCount + 1 mod 2 * N + 1
else
  CCount <- 0
end
"""

_G2_TAIL = """\
if Kind = Right and Count = 0
  CElem <- 1
else
  CElem <- LRule(N, CElem-, CElem, CElem+)
end
"""


def _extend(n: int, p: RuleProgram, decl_text: str, tail: str, new_name: str, tag: str):
    _require_sparse(p)
    _require_valid(p)
    keep = set(SPARSE_NAMES)
    decls, procs, body, mapping = embed(p, {new_name}, keep=keep)
    ctx = "".join(decl_line + "\n" for decl_line in (
        "num param N = 1", "enum field Kind in {Left, Right, Return}", "num field Count <= 2"))
    extra = parse_ast(ctx + decl_text + "\n" + tail)
    new_decl = [d for d in extra.decls if isinstance(d, A.FieldDecl) and d.name == new_name]
    ast = A.Program(tuple(decls) + tuple(new_decl), tuple(procs), tuple(body) + extra.body)
    return from_ast(ast, name=f"{tag}({n},{p.name or 'p'})")


def g1(n: int, p: RuleProgram) -> RuleProgram:
    """Add the CCount layer: each base column stays non-blank through its cycle.

    The counter runs mod 2N+1 so it is non-zero on rows 0..2N-1 of the
    cycle; row 2N of the base column holds the returning cell.
    """
    return _extend(n, p, "num field CCount <= 2 * N", _G1_TAIL, "CCount", "g1")


def g2(n: int, p: RuleProgram) -> RuleProgram:
    """Add the CElem layer: each macro-cell carries a copy of L(N) at its base."""
    return _extend(n, p, "num field CElem <= LSize(N)", _G2_TAIL, "CElem", "g2")


# ------------------------------------------------------------ transformations

@dataclass(frozen=True)
class Transformation:
    name: str
    applier: Callable[[int, RuleProgram], RuleProgram]
    params: dict = field(default_factory=dict)

    def __call__(self, n: int, p: RuleProgram) -> RuleProgram:
        return self.applier(n, p)


def compose_transform(G: Transformation, H: Transformation) -> Transformation:
    return Transformation(f"{G.name}.{H.name}", lambda n, p: G(n, H(n, p)),
                          {"outer": G.name, "inner": H.name})


IDENTITY = Transformation("identity", lambda n, p: p)
SPARSE = Transformation("sparse", sparsify)
G1 = Transformation("g1", g1)
G2 = Transformation("g2", g2)


def partial_sparse(N: Callable[[int], bool], name: str = "N") -> Transformation:
    return Transformation(f"sparse[{name}]", lambda n, p: sparsify_partial(N, n, p), {"N": name})


def g_dispatch(i: int, N: Callable[[int], bool], name: str = "N") -> Transformation:
    """G_i^N: plain G_s on levels in N, G_i after G_s elsewhere."""
    Gi = {1: g1, 2: g2}[i]

    def apply(n, p):
        s = sparsify(n, p)
        return s if N(n) else Gi(n, s)
    return Transformation(f"g{i}[{name}]", apply, {"N": name})


# ------------------------------------------------------------------- L(n)

@dataclass(frozen=True)
class LSet:
    """The pattern L(n), its seeded rows eta_n and the rule f_n.

    Coordinates are (i, t) with i the column offset and t the row.  Values
    are indexed 1.. in lexicographic (t, i) order; 0 stands for #.
    """
    n: int
    members: frozenset
    order: tuple  # members sorted by (t, i)
    eta_rows: tuple  # rows 0..n-1 over columns -n+1..n-1, values as indices
    table: dict  # (u, v, w) index triple -> index

    @property
    def size(self) -> int:
        return len(self.members)

    def index(self, cell) -> int:
        return 0 if cell is None else self.order.index(tuple(cell)) + 1

    def cell(self, k: int):
        return None if k == 0 else self.order[k - 1]

    def f(self, u: int, v: int, w: int) -> int:
        return self.table.get((u, v, w), 0)

    def column_counts(self) -> dict:
        out: dict = {}
        for i, _ in self.members:
            out[i] = out.get(i, 0) + 1
        return out


def column_bound(n: int) -> int:
    return 2 * math.ceil(math.log2(n + 1)) + 2


@lru_cache(maxsize=None)
def _l_members(n: int) -> frozenset:
    if n == 1:
        return frozenset({(0, 0)})
    if n == 2:
        return frozenset({(0, 0), (-1, 1), (0, 1), (1, 1)})
    hi, lo = (n + 2) // 2, (n + 1) // 2  # n* = ceil((n+1)/2), n_* = floor((n+1)/2)
    s = {(-k, k) for k in range(lo)} | {(k, k) for k in range(hi)}
    s |= {(i - (lo - 1), t + lo - 1) for i, t in _l_members(hi)}
    s |= {(i + hi - 1, t + hi - 1) for i, t in _l_members(lo)}
    return frozenset(s)


def _certify(n: int, members: frozenset):
    width = n - 1
    if not all(-width <= i <= width and 0 <= t <= width for i, t in members):
        raise AssertionError(f"L({n}) leaves its bounding box")
    if not all((i, width) in members for i in range(-width, width + 1)):
        raise AssertionError(f"L({n}) top row is not full")
    bound = column_bound(n)
    counts: dict = {}
    for i, _ in members:
        counts[i] = counts.get(i, 0) + 1
    if max(counts.values()) > bound:
        raise AssertionError(f"L({n}) column count {max(counts.values())} exceeds {bound}")


_l_lock = threading.Lock()
_l_cache: dict = {}


def l_set(n: int) -> LSet:
    if n < 1:
        raise ParameterError("L(n) is defined for n >= 1")
    hit = _l_cache.get(n)
    if hit is not None:
        return hit
    members = _l_members(n)
    _certify(n, members)
    order = tuple(sorted(members, key=lambda c: (c[1], c[0])))
    idx = {c: k + 1 for k, c in enumerate(order)}
    span = range(-n + 1, n)
    eta = tuple(tuple(idx.get((i, t), 0) for i in span) for t in range(n))

    def at(t, i):
        return idx.get((i, t), 0)

    table: dict = {}
    for (i, t) in order:
        if t == 0:
            continue
        key = (at(t - 1, i - 1), at(t - 1, i), at(t - 1, i + 1))
        if key in table or key == (0, 0, 0):
            raise AssertionError(f"f_{n} is not well defined at {(i, t)}")
        table[key] = idx[(i, t)]
    # evolution from the seed must reproduce eta exactly
    row = np.zeros(2 * n + 3, dtype=np.int64)
    row[n + 1] = idx[(0, 0)]
    for t in range(1, n):
        padded = np.concatenate([[0], row, [0]])
        row = np.array([table.get((int(padded[j]), int(padded[j + 1]), int(padded[j + 2])), 0)
                        for j in range(len(row))], dtype=np.int64)
        want = [at(t, i) for i in range(-n - 1, n + 2)]
        if list(row) != want:
            raise AssertionError(f"f_{n} evolution differs from eta_{n} at row {t}")
    out = LSet(n, members, order, eta, table)
    with _l_lock:
        _l_cache[n] = out
    return out


def l_rule(n: int, triple) -> object:
    """f_n on cells given as (i, t) tuples or None for #."""
    L = l_set(n)
    u, v, w = (L.index(x) for x in triple)
    return L.cell(L.f(u, v, w))


# ------------------------------------------------------------ descriptors

def sparse_descriptor(n: int, p: RuleProgram, host: RuleProgram | None = None,
                      mapping: dict | None = None, extra: dict | None = None):
    """Level-n sparse simulation of p by ``host`` (default G_s(n, p))."""
    from .sim import sparse_simulation
    if host is None:
        host, mapping = sparsify_with_map(n, p)
    if mapping is None:
        mapping = {}
    if extra is None:
        extra = {}
        if host.is_field("CCount"):
            extra["CCount"] = 1
        if host.is_field("CElem"):
            extra["CElem"] = 1
    return sparse_simulation(n, host, p, mapping, extra)


def sparse_oracle(host: RuleProgram):
    """Analytic demanding predicate of a sparsified program.

    Live right movers with a positive counter demand their left neighbor;
    left movers and returning cells demand their right neighbor.  States no
    rule output can produce are vacuously demanding.
    """
    lay = host.layout
    N = int(host.param("N"))
    payload_mask = np.uint64(0)
    for f in lay.fields:
        if f.name not in ("Live", "Kind", "Count"):
            payload_mask |= np.uint64(lay.mask(f.name))

    def oracle(states, delta: int):
        s = np.asarray(states).astype(np.uint64)
        live = lay.get(s, "Live").astype(bool)
        kind = lay.get(s, "Kind")
        count = lay.get(s, "Count")
        nonblank = s != 0
        reachable = live & (kind <= 2) & (count <= 2 * N)
        reachable &= ~((kind == 2) & (count <= N))
        reachable &= ~((kind == 0) & (count == 0))
        reachable &= ~((kind == 1) & (count == 0) & ((s & payload_mask) == 0))
        right_moving = (kind == 1) & (count > 0)
        left_need = (kind == 0) | (kind == 2)
        if delta == -1:
            dem = right_moving
        elif delta == 1:
            dem = left_need
        else:
            dem = np.zeros_like(live)
        return nonblank & (dem | ~reachable)
    return oracle


def sparse_rule(n: int, p: RuleProgram, host: RuleProgram | None = None):
    from .interp import rule_of
    host = host or sparsify(n, p)
    r = rule_of(host)
    if host.is_field("CCount") or host.is_field("CElem"):
        return r
    r.demanding_oracle = sparse_oracle(host)
    return r


# ------------------------------------------------------------ builtins

def _text_of(b: Bits) -> RuleProgram:
    return parse(b.to_text())


def _sparsify_builtin(n, p):
    return Bits.from_text(sparsify(int(n), _text_of(p)).text)


def _inc_level_builtin(p):
    from .lang.program import inc_level
    return Bits.from_text(inc_level(_text_of(p)).text)


def _io_cost(args, res):
    return byte_cost(*args) + byte_cost(res)


def _res_space(args, res):
    return res.length if isinstance(res, Bits) else 1


register(Builtin("Sparsify", ("num", "str"), "str", _sparsify_builtin, _io_cost, _res_space,
                 memo=True))
register(Builtin("SparsifyG1", ("num", "str"), "str",
                 lambda n, p: Bits.from_text(g1(int(n), sparsify(int(n), _text_of(p))).text),
                 _io_cost, _res_space, memo=True))
register(Builtin("SparsifyG2", ("num", "str"), "str",
                 lambda n, p: Bits.from_text(g2(int(n), sparsify(int(n), _text_of(p))).text),
                 _io_cost, _res_space, memo=True))
register(Builtin("Identity", ("num", "str"), "str", lambda n, p: p, _io_cost, _res_space))
register(Builtin("IncLevel", ("str",), "str", _inc_level_builtin, _io_cost, _res_space, memo=True))
register(Builtin("IsZero", ("str",), "bool", lambda s: s.value == 0,
                 lambda a, r: byte_cost(*a), lambda a, r: 1))
register(Builtin("LSize", ("num",), "num", lambda n: l_set(max(1, int(n))).size,
                 lambda a, r: max(1, int(a[0])), lambda a, r: max(1, int(r).bit_length())))
register(Builtin("LRule", ("num", "num", "num", "num"), "num",
                 lambda n, u, v, w: l_set(max(1, int(n))).f(int(u), int(v), int(w)),
                 lambda a, r: 4, lambda a, r: max(1, int(r).bit_length())))

TRANSFORM_BUILTINS = {"sparse": "Sparsify", "g1": "SparsifyG1", "g2": "SparsifyG2",
                      "identity": "Identity"}
