"""The interpreter: evaluation, compiled local rules, costs and the agent.

``eval`` runs the reference tree walker.  ``rule_of`` compiles a program to
Python closures and wraps it as a memoized LocalRule.  ``measure_costs``
meters the tree walker (sampled or exhaustive) or computes a static worst
case bound.  ``AgentMachine`` models the head that computes a colony's new
state, with an oracle backend and a literal stack-machine backend.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import LocalRule
from .errors import CapacityError, HaltedError, OutOfSpaceFault, PreconditionError
from .lang import ast as A
from .lang.builtins import BUILTINS, call_builtin
from .lang.evaluator import Evaluator, Meter, arith, compare, coerce_field
from .lang.program import RuleProgram
from .lang.values import Bits, size_bits

EXHAUSTIVE_COST_K = 5  # 3K <= 16 bits of triples


# ------------------------------------------------------------------ eval

def eval_program(program: RuleProgram, a: int, b: int, c: int,
                 diagnostics: list | None = None) -> int:
    """Run the program on the neighborhood (a, b, c) and return the new b."""
    return Evaluator(program, diagnostics=diagnostics).run(int(a), int(b), int(c))


# the public name mirrors the operation
eval = eval_program  # noqa: A001


# -------------------------------------------------------------- compiling

class _Ctx:
    __slots__ = ("a", "c", "own")


class Compiler:
    """Compile a program into closures ``fn(a, b, c) -> int``."""

    def __init__(self, program: RuleProgram):
        self.p = program
        self.lay = program.layout
        self.index = {f.name: k for k, f in enumerate(self.lay.fields)}
        self.shifts = [self.lay.K - f.offset - f.width for f in self.lay.fields]
        self.masks = [(1 << f.width) - 1 for f in self.lay.fields]
        self.procs: dict[str, Callable] = {}

    def build(self) -> Callable[[int, int, int], int]:
        for proc in self.p.ast.procs:
            self.procs[proc.name] = None  # placeholder, resolved lazily
        compiled_procs = {}

        def get_proc(name):
            f = compiled_procs.get(name)
            if f is None:
                proc = self.p.proc(name)
                body = self.block(proc.body, {n: k for k, n in enumerate(proc.params)})
                compiled_procs[name] = f = body
            return f

        self.get_proc = get_proc
        body = self.block(self.p.ast.body, {})
        shifts, masks = self.shifts, self.masks
        n = len(shifts)
        pairs = list(zip(shifts, masks))

        def fn(a: int, b: int, c: int) -> int:
            ctx = _Ctx()
            ctx.a = a
            ctx.c = c
            ctx.own = [(b >> sh) & m for sh, m in pairs]
            body(ctx, ())
            s = 0
            own = ctx.own
            for k in range(n):
                s |= own[k] << shifts[k]
            return s

        return fn

    # statements return None or a 1-tuple carrying a return value
    def block(self, body, loc: dict):
        stmts = [self.stmt(s, loc) for s in body]
        if len(stmts) == 1:
            return stmts[0]

        def run(ctx, args):
            for s in stmts:
                r = s(ctx, args)
                if r is not None:
                    return r
            return None
        return run

    def stmt(self, s, loc):
        if isinstance(s, A.Assign):
            val = self.expr(s.value, loc)
            writers = [self.writer(t.name) for t in s.targets]
            if len(writers) == 1:
                w = writers[0]

                def run(ctx, args):
                    w(ctx, val(ctx, args))
                return run

            def run(ctx, args):
                v = val(ctx, args)
                for w in writers:
                    w(ctx, v)
            return run
        if isinstance(s, A.If):
            branches = [(self.expr(c, loc), self.block(b, loc)) for c, b in s.branches]
            orelse = self.block(s.orelse, loc) if s.orelse is not None else None

            def run(ctx, args):
                for cond, body in branches:
                    if cond(ctx, args):
                        return body(ctx, args)
                if orelse is not None:
                    return orelse(ctx, args)
                return None
            return run
        if isinstance(s, A.CallStmt):
            call = self.expr(s.call, loc)

            def run(ctx, args):
                call(ctx, args)
            return run
        if isinstance(s, A.Return):
            if s.value is None:
                return lambda ctx, args: (False,)
            val = self.expr(s.value, loc)
            return lambda ctx, args: (val(ctx, args),)
        raise TypeError(f"unknown statement {s!r}")

    def writer(self, name: str):
        k = self.index[name]
        fd = self.p.field_decl(name)
        width = self.lay.fields[k].width
        if fd.kind == "bool":
            def w(ctx, v):
                ctx.own[k] = 1 if (v.value if isinstance(v, Bits) else v) else 0
            return w
        if fd.kind == "bits":
            def w(ctx, v):
                ctx.own[k] = coerce_field(fd, v, width, None, name)
            return w
        m = (1 << width) - 1

        def w(ctx, v):
            ctx.own[k] = int(v) & m
        return w

    def expr(self, e, loc):
        t = type(e)
        if t is A.Num or t is A.BoolLit:
            v = e.value
            return lambda ctx, args: v
        if t is A.Str:
            v = Bits.from_text(e.value)
            return lambda ctx, args: v
        if t is A.This:
            p = self.p
            return lambda ctx, args: p.this_bits
        if t is A.Ref:
            return self.ref(e, loc)
        if t is A.Bin:
            lf, rf = self.expr(e.left, loc), self.expr(e.right, loc)
            op = e.op
            if op == "and":
                return lambda ctx, args: bool(lf(ctx, args)) and bool(rf(ctx, args))
            if op == "or":
                return lambda ctx, args: bool(lf(ctx, args)) or bool(rf(ctx, args))
            if op == "+":
                return lambda ctx, args: int(lf(ctx, args)) + int(rf(ctx, args))
            if op == "-":
                return lambda ctx, args: int(lf(ctx, args)) - int(rf(ctx, args))
            if op == "*":
                return lambda ctx, args: int(lf(ctx, args)) * int(rf(ctx, args))
            return lambda ctx, args: arith(op, int(lf(ctx, args)), int(rf(ctx, args)))
        if t is A.Cmp:
            items = [self.expr(x, loc) for x in e.items]
            ops = e.ops
            if len(ops) == 1:
                op = ops[0]
                a0, b0 = items
                if op == "=":
                    return lambda ctx, args: _norm(a0(ctx, args)) == _norm(b0(ctx, args))
                if op == "!=":
                    return lambda ctx, args: _norm(a0(ctx, args)) != _norm(b0(ctx, args))
                return lambda ctx, args: compare(op, a0(ctx, args), b0(ctx, args))

            def run(ctx, args):
                left = items[0](ctx, args)
                for op, it in zip(ops, items[1:]):
                    right = it(ctx, args)
                    if not compare(op, left, right):
                        return False
                    left = right
                return True
            return run
        if t is A.Unary:
            f = self.expr(e.operand, loc)
            if e.op == "not":
                return lambda ctx, args: not f(ctx, args)
            return lambda ctx, args: -int(f(ctx, args))
        if t is A.Index:
            tf, xf = self.expr(e.target, loc), self.expr(e.index, loc)

            def run(ctx, args):
                s = tf(ctx, args)
                return s.bit(int(xf(ctx, args))) if isinstance(s, Bits) else 0
            return run
        if t is A.Call:
            argf = [self.expr(a, loc) for a in e.args]
            name = e.name
            if self.p.proc(name) is not None:
                get = self.get_proc

                def run(ctx, args):
                    vals = tuple(f(ctx, args) for f in argf)
                    r = get(name)(ctx, vals)
                    return False if r is None else r[0]
                return run

            def run(ctx, args):
                return call_builtin(name, tuple(f(ctx, args) for f in argf))
            return run
        raise TypeError(f"unknown expression {e!r}")

    def ref(self, e: A.Ref, loc):
        name = e.name
        if not e.nb and name in loc:
            k = loc[name]
            return lambda ctx, args: args[k]
        if self.p.is_field(name):
            k = self.index[name]
            sh, m = self.shifts[k], self.masks[k]
            kind = self.p.field_decl(name).kind
            length = self.lay.fields[k].width
            if e.nb:
                attr = "a" if e.nb == "-" else "c"
                if kind == "bool":
                    if attr == "a":
                        return lambda ctx, args: bool((ctx.a >> sh) & 1)
                    return lambda ctx, args: bool((ctx.c >> sh) & 1)
                if kind == "bits":
                    return lambda ctx, args: Bits((getattr(ctx, attr) >> sh) & m, length)
                if attr == "a":
                    return lambda ctx, args: (ctx.a >> sh) & m
                return lambda ctx, args: (ctx.c >> sh) & m
            if kind == "bool":
                return lambda ctx, args: bool(ctx.own[k])
            if kind == "bits":
                return lambda ctx, args: Bits(ctx.own[k], length)
            return lambda ctx, args: ctx.own[k]
        if self.p.is_param(name):
            p = self.p
            box = []

            def run(ctx, args):
                if not box:
                    box.append(p.param(name))
                return box[0]
            return run
        v = self.p.label_index(name)
        return lambda ctx, args: v


def _norm(v):
    return int(v) if isinstance(v, bool) else v


def compile_program(program: RuleProgram) -> Callable[[int, int, int], int]:
    return Compiler(program).build()


def rule_of(program: RuleProgram, name: str = "") -> LocalRule:
    fn = compile_program(program)
    return LocalRule(program.K, fn, origin="interpreted", name=name or program.name or "program",
                     program=program, layout=program.layout)


# ------------------------------------------------------------------ costs

@dataclass(frozen=True)
class CostProfile:
    time_steps: int
    space_bits: int
    sampled_inputs: int
    exact: bool = False
    mode: str = "sampled"

    def __str__(self) -> str:
        return (f"time={self.time_steps} space={self.space_bits} inputs={self.sampled_inputs} "
                f"mode={self.mode}{' exact' if self.exact else ''}")


def _metered(program: RuleProgram, a: int, b: int, c: int) -> tuple[int, int]:
    m = Meter()
    Evaluator(program, meter=m).run(a, b, c)
    return m.time, m.peak


def measure_costs(program: RuleProgram, mode: str = "sampled", n: int = 256,
                  seed: int = 0) -> CostProfile:
    """Cost profile in one of three modes: exhaustive, sampled or bound."""
    K = program.K
    if mode == "bound":
        t, s = static_bound(program)
        return CostProfile(t, K + s, 0, exact=False, mode="bound")
    if mode == "exhaustive":
        if K > EXHAUSTIVE_COST_K:
            raise CapacityError(f"exhaustive costs need K <= {EXHAUSTIVE_COST_K}, got {K}")
        tmax = smax = 0
        count = 0
        top = 1 << K
        for a in range(top):
            for b in range(top):
                for c in range(top):
                    t, s = _metered(program, a, b, c)
                    tmax, smax = max(tmax, t), max(smax, s)
                    count += 1
        return CostProfile(tmax, K + smax, count, exact=True, mode="exhaustive")
    if mode != "sampled":
        raise ValueError(f"unknown cost mode {mode!r}")
    rng = np.random.default_rng(seed)
    tmax = smax = 0
    for k in range(max(1, n)):
        if k == 0:
            a = b = c = 0
        else:
            a, b, c = (int.from_bytes(rng.bytes((K + 7) // 8 or 1), "big") % (1 << K)
                       for _ in range(3))
        t, s = _metered(program, a, b, c)
        tmax, smax = max(tmax, t), max(smax, s)
    return CostProfile(tmax, K + smax, max(1, n), exact=False, mode="sampled")


class _Bound:
    """Static worst case over all paths, procedures expanded at call sites."""

    def __init__(self, program: RuleProgram):
        self.p = program
        self.lay = program.layout

    def is_const(self, e, loc) -> bool:
        for n in A.walk(e):
            if isinstance(n, A.Ref) and (n.nb or n.name in loc or self.p.is_field(n.name)):
                return False
            if isinstance(n, A.Call) and self.p.proc(n.name) is not None:
                return False
        return True

    def expr(self, e, loc) -> tuple[int, int, int]:
        """(time, space, size) upper bounds."""
        if self.is_const(e, loc):
            m = Meter()
            v = Evaluator(self.p, meter=m).const(e)
            return m.time, m.peak, size_bits(v)
        t = type(e)
        if t is A.Ref:
            if not e.nb and e.name in loc:
                return 1, loc[e.name], loc[e.name]
            w = self.lay.field(e.name).width
            return 1, w, w
        if t is A.Bin:
            tl, sl, zl = self.expr(e.left, loc)
            tr, sr, zr = self.expr(e.right, loc)
            if e.op in ("and", "or"):
                z = 1
            elif e.op in ("+", "-"):
                z = max(zl, zr) + 1
            elif e.op == "*":
                z = zl + zr
            elif e.op == "div":
                z = zl
            else:
                z = zr
            return 1 + tl + tr, max(sl, zl + sr, z), z
        if t is A.Cmp:
            time, space, prev = 1, 0, 0
            for it in e.items:
                ti, si, zi = self.expr(it, loc)
                time += ti
                space = max(space, prev + si)
                prev = zi
            return time, max(space, 1), 1
        if t is A.Unary:
            to, so, zo = self.expr(e.operand, loc)
            z = 1 if e.op == "not" else zo + 1
            return 1 + to, max(so, z), z
        if t is A.Index:
            tt, st, zt = self.expr(e.target, loc)
            ti, si, zi = self.expr(e.index, loc)
            return 1 + tt + ti + max(1, zi), max(st, zt + si, 1), 1
        if t is A.Call:
            time, space, held = 1, 0, 0
            sizes = []
            for a in e.args:
                ta, sa, za = self.expr(a, loc)
                time += ta
                space = max(space, held + sa)
                held += za
                sizes.append(za)
            proc = self.p.proc(e.name)
            if proc is not None:
                bt, bs, bz = self.block(proc.body, dict(zip(proc.params, sizes)))
                return time + bt, max(space, held + bs), max(1, bz)
            b = BUILTINS[e.name]
            if b.ret_type == "str":
                raise CapacityError(f"cannot bound string builtin {e.name} on non-constant input")
            z = max(sizes + [1])
            bt = sum((s + 7) // 8 for s in sizes) + 1
            return time + bt, max(space, held + sum(sizes) + z), z
        raise TypeError(f"cannot bound {e!r}")

    def block(self, body, loc) -> tuple[int, int, int]:
        time = space = ret = 0
        for s in body:
            ts, ss, rs = self.stmt(s, loc)
            time += ts
            space = max(space, ss)
            ret = max(ret, rs)
        return time, space, ret

    def stmt(self, s, loc) -> tuple[int, int, int]:
        if isinstance(s, A.Assign):
            tv, sv, _ = self.expr(s.value, loc)
            return 1 + tv, sv, 0
        if isinstance(s, A.CallStmt):
            tv, sv, _ = self.expr(s.call, loc)
            return 1 + tv, sv, 0
        if isinstance(s, A.Return):
            if s.value is None:
                return 1, 1, 1
            tv, sv, zv = self.expr(s.value, loc)
            return 1 + tv, sv, zv
        if isinstance(s, A.If):
            conds = 0
            worst_t = 0
            space = ret = 0
            for cond, body in s.branches:
                tc, sc, _ = self.expr(cond, loc)
                conds += tc
                tb, sb, rb = self.block(body, loc)
                worst_t = max(worst_t, conds + tb)
                space = max(space, sc, sb)
                ret = max(ret, rb)
            if s.orelse is not None:
                tb, sb, rb = self.block(s.orelse, loc)
                worst_t = max(worst_t, conds + tb)
                space = max(space, sb)
                ret = max(ret, rb)
            else:
                worst_t = max(worst_t, conds)
            return 1 + worst_t, space, ret
        raise TypeError(f"cannot bound {s!r}")


def static_bound(program: RuleProgram) -> tuple[int, int]:
    """(time, space-without-state) worst case over every execution path."""
    t, s, _ = _Bound(program).block(program.ast.body, {})
    return t, s


# ------------------------------------------------------------------ agent

TRACKS = ("LMail", "Simu", "RMail", "Prog")


@dataclass(frozen=True)
class AgentMachine:
    """Head that computes a colony's new state.

    ``tracks`` maps LMail/Simu/RMail/Prog to read-only bit tuples of length
    Q; ``work`` is the read-write track.  The oracle backend sweeps the head
    right then left and latches the result at step 2Q-2; the literal backend
    runs a stack machine compiled from the program.
    """
    program: RuleProgram
    backend: str
    Q: int
    tracks: dict
    work: tuple
    head: int = 0
    control: tuple = ("start",)
    step_count: int = 0
    halted: bool = False
    out: tuple = ()
    doom: bool = False
    code: tuple = ()


def _word(bits, K: int) -> int:
    v = 0
    for j in range(K):
        v = (v << 1) | int(bits[j])
    return v


def make_agent(program: RuleProgram, Q: int, lmail, simu, rmail, backend: str = "oracle",
               prog_bits=None) -> AgentMachine:
    if backend not in ("oracle", "literal"):
        raise PreconditionError(f"unknown agent backend {backend!r}")
    K = program.K
    if K > Q:
        raise OutOfSpaceFault(f"colony of {Q} cells cannot hold a {K}-bit state")
    pad = lambda bits: tuple(int(x) for x in list(bits)[:Q]) + (0,) * max(0, Q - len(list(bits)))
    if prog_bits is None:
        enc = Bits.from_text(program.text)
        prog_bits = [enc.bit(j) for j in range(Q)]
    tracks = {"LMail": pad(lmail), "Simu": pad(simu), "RMail": pad(rmail), "Prog": pad(prog_bits)}
    code = compile_agent(program) if backend == "literal" else ()
    return AgentMachine(program, backend, Q, tracks, (0,) * Q, 0, ("start",), 0, False,
                        (0,) * Q, False, code)


def agent_result(m: AgentMachine) -> int:
    K = m.program.K
    return rule_of_cached(m.program)(
        _word(m.tracks["LMail"], K), _word(m.tracks["Simu"], K), _word(m.tracks["RMail"], K))


_compiled_cache: dict = {}


def rule_of_cached(program: RuleProgram):
    f = _compiled_cache.get(program.text)
    if f is None:
        f = _compiled_cache[program.text] = compile_program(program)
    return f


def agent_step(m: AgentMachine) -> AgentMachine:
    if m.halted:
        raise HaltedError("agent already halted")
    if m.backend == "oracle":
        return _oracle_step(m)
    if m.backend == "literal":
        return _literal_step(m)
    raise ValueError(f"unknown backend {m.backend!r}")


def run_agent(m: AgentMachine, max_steps: int = 10 ** 7) -> AgentMachine:
    while not m.halted:
        if m.step_count >= max_steps:
            raise CapacityError("agent did not halt within the step budget")
        m = agent_step(m)
    return m


def _oracle_step(m: AgentMachine) -> AgentMachine:
    Q = m.Q
    s = m.step_count
    if s < Q - 1:
        return replace(m, head=m.head + 1, step_count=s + 1)
    if s < 2 * Q - 2:
        return replace(m, head=m.head - 1, step_count=s + 1)
    K = m.program.K
    r = agent_result(m)
    out = tuple(((r >> (K - 1 - j)) & 1) if j < K else 0 for j in range(Q))
    return replace(m, out=out, doom=(r == 0), halted=True, step_count=s + 1)


# ---- literal backend: a stack machine over the Work track
#
# Work cells [0, K) hold the state being rewritten, cells [K, Q) hold the
# stack.  Every instruction expands to micro-operations; one micro-operation
# is one step: moving the head by one cell, or reading/writing under it.

def compile_agent(program: RuleProgram) -> tuple:
    code: list = []
    labels = [0]

    def new_label():
        labels[0] += 1
        return labels[0]

    def expr(e, loc, depth):
        t = type(e)
        if t in (A.Str, A.This, A.Index):
            raise PreconditionError("the literal agent does not support strings")
        if t is A.Num or t is A.BoolLit:
            code.append(("const", int(e.value)))
        elif t is A.Ref:
            if not e.nb and e.name in loc:
                code.append(("slot", loc[e.name]))
            elif program.is_field(e.name):
                if program.field_decl(e.name).kind == "bits":
                    raise PreconditionError("the literal agent does not support bits fields")
                code.append(("field", e.name, e.nb))
            elif program.is_param(e.name):
                v = program.param(e.name)
                if isinstance(v, Bits):
                    raise PreconditionError("the literal agent does not support string params")
                code.append(("const", int(v)))
            else:
                code.append(("const", program.label_index(e.name)))
        elif t is A.Bin and e.op in ("and", "or"):
            end = new_label()
            expr(e.left, loc, depth)
            code.append(("jshort", e.op, end))
            expr(e.right, loc, depth)
            code.append(("bool",))
            code.append(("label", end))
        elif t is A.Bin:
            expr(e.left, loc, depth)
            expr(e.right, loc, depth + 1)
            code.append(("bin", e.op))
        elif t is A.Cmp:
            # pairwise links joined by a logical and (operands are re-read)
            for k, op in enumerate(e.ops):
                expr(e.items[k], loc, depth + (1 if k else 0))
                expr(e.items[k + 1], loc, depth + (2 if k else 1))
                code.append(("cmp", op))
                if k:
                    code.append(("bin", "land"))
        elif t is A.Unary:
            expr(e.operand, loc, depth)
            code.append(("un", e.op))
        elif t is A.Call:
            proc = program.proc(e.name)
            if proc is None:
                b = BUILTINS[e.name]
                if b.ret_type == "str" or "str" in b.arg_types:
                    raise PreconditionError("the literal agent does not support string builtins")
                for k, a in enumerate(e.args):
                    expr(a, loc, depth + k)
                code.append(("builtin", e.name, len(e.args)))
                return
            code.append(("const", 0))  # result slot at depth
            for k, a in enumerate(e.args):
                expr(a, loc, depth + 1 + k)
            inner = {n: depth + 1 + k for k, n in enumerate(proc.params)}
            end = new_label()
            block(proc.body, inner, depth + 1 + len(proc.params), (depth, end))
            code.append(("label", end))
            code.append(("drop", len(proc.params)))
        else:
            raise TypeError(f"cannot compile {e!r}")

    def block(body, loc, depth, ret):
        for s in body:
            stmt(s, loc, depth, ret)

    def stmt(s, loc, depth, ret):
        if isinstance(s, A.Assign):
            expr(s.value, loc, depth)
            for k, t in enumerate(s.targets):
                last = k == len(s.targets) - 1
                code.append(("store", t.name, last))
        elif isinstance(s, A.CallStmt):
            expr(s.call, loc, depth)
            code.append(("drop", 1))
        elif isinstance(s, A.Return):
            slot, end = ret
            if s.value is None:
                code.append(("const", 0))
            else:
                expr(s.value, loc, depth)
            code.append(("put", slot))
            code.append(("jmpdrop", end))
        elif isinstance(s, A.If):
            end = new_label()
            for cond, body in s.branches:
                nxt = new_label()
                expr(cond, loc, depth)
                code.append(("jf", nxt))
                block(body, loc, depth, ret)
                code.append(("jmp", end))
                code.append(("label", nxt))
            if s.orelse is not None:
                block(s.orelse, loc, depth, ret)
            code.append(("label", end))

    block(program.ast.body, {}, 0, None)
    code.append(("halt",))
    # resolve labels to instruction indices
    pos = {}
    flat = []
    for ins in code:
        if ins[0] == "label":
            pos[ins[1]] = len(flat)
        else:
            flat.append(ins)
    out = []
    for ins in flat:
        if ins[0] in ("jmp", "jf", "jmpdrop"):
            ins = (ins[0], pos[ins[1]])
        elif ins[0] == "jshort":
            ins = ("jshort", ins[1], pos[ins[2]])
        out.append(ins)
    return tuple(out)


def _literal_step(m: AgentMachine) -> AgentMachine:
    """One transition: a head move, a read/write under the head, or a control step."""
    p = m.program
    K = p.K
    lay = p.layout
    Q = m.Q
    ctrl = m.control
    work = m.work
    head = m.head
    out = m.out
    tag = ctrl[0]

    def done(**kw):
        return replace(m, step_count=m.step_count + 1, **kw)

    def goto(target, then):
        if not 0 <= target < Q:
            raise OutOfSpaceFault(f"head would leave the colony at {target}")
        if head < target:
            return done(head=head + 1, control=then if head + 1 == target else ("goto", target, then))
        if head > target:
            return done(head=head - 1, control=then if head - 1 == target else ("goto", target, then))
        return None

    if tag == "goto":
        _, target, then = ctrl
        r = goto(target, then)
        return r if r is not None else done(control=then)
    if tag == "start":
        # copy the Simu bits into the state region, one cell per step
        return done(control=("copy", 0))
    if tag == "copy":
        j = ctrl[1]
        if j >= K:
            return done(control=("exec", 0, (), 0, ()))
        if head != j:
            return goto(j, ctrl)
        w = list(work)
        w[j] = m.tracks["Simu"][j]
        return done(work=tuple(w), control=("copy", j + 1))
    if tag == "emit":
        j, nonzero = ctrl[1], ctrl[2]
        if j >= K:
            return done(control=("final",), doom=not nonzero)
        if head != j:
            return goto(j, ctrl)
        o = list(out)
        o[j] = work[j]
        return done(out=tuple(o), control=("emit", j + 1, nonzero or bool(work[j])))
    if tag == "final":
        return done(halted=True, control=("halted",))
    if tag == "io":
        # pending micro operations: ("rd", track, pos) / ("wr", pos, value) / ("sp", pos)
        _, ops, regs, resume = ctrl
        op = ops[0]
        rest = ops[1:]
        target = op[2] if op[0] == "rd" else op[1]
        if not 0 <= target < Q:
            raise OutOfSpaceFault(f"stack or state access at {target} outside colony of {Q}")
        if head != target:
            return goto(target, ctrl)
        if op[0] == "rd":
            src = work if op[1] == "Work" else m.tracks[op[1]]
            regs = regs + (int(src[target]),)
            nxt = ("io", rest, regs, resume) if rest else _resume(resume, regs)
            return done(control=nxt)
        w = list(work)
        w[target] = op[2]
        nxt = ("io", rest, regs, resume) if rest else _resume(resume, regs)
        return done(work=tuple(w), control=nxt)
    if tag == "exec":
        _, pc, _regs, sp, pend = ctrl
        if pend:
            return done(control=_apply_pending(m, pc, sp, pend))
        return done(control=_fetch(m, pc, sp))
    raise HaltedError(f"agent in state {tag!r} cannot step")


def _resume(resume, regs):
    kind, pc, sp, pend = resume
    return ("exec", pc, regs, sp, pend + (regs,))


def _bits_of(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - j)) & 1 for j in range(width)]


def _fetch(m: AgentMachine, pc: int, sp: int):
    """Decode instruction pc into micro operations (a control step)."""
    p = m.program
    lay = p.layout
    K = p.K
    base = K
    ins = m.code[pc]
    op = ins[0]

    def io(ops, pend_tag):
        return ("io", tuple(ops), (), ("exec", pc, sp, (pend_tag,)))

    if op == "halt":
        return ("emit", 0, False)
    if op == "const":
        return io([("wr", base + sp, ins[1])], "push")
    if op == "slot":
        return io([("rd", "Work", base + ins[1])], "pushread")
    if op == "field":
        name, nb = ins[1], ins[2]
        f = lay.field(name)
        track = {"": "Work", "-": "LMail", "+": "RMail"}[nb]
        return io([("rd", track, f.offset + j) for j in range(f.width)], "pushbits")
    if op in ("bin", "cmp"):
        return io([("rd", "Work", base + sp - 2), ("rd", "Work", base + sp - 1)], "binary")
    if op in ("un", "bool", "jf", "jshort", "store", "put"):
        return io([("rd", "Work", base + sp - 1)], "unary")
    if op == "builtin":
        n = ins[2]
        return io([("rd", "Work", base + sp - n + k) for k in range(n)], "builtin")
    if op == "drop":
        # result of an inlined call moves down over its arguments
        n = ins[1]
        if n == 0:
            return ("exec", pc + 1, (), sp, ())
        return io([("rd", "Work", base + sp - 1 - n)], "dropcall")
    if op == "jmp":
        return ("exec", ins[1], (), sp, ())
    if op == "jmpdrop":
        return ("exec", ins[1], (), sp, ())
    raise ValueError(f"unknown instruction {ins!r}")


def _apply_pending(m: AgentMachine, pc: int, sp: int, pend):
    """Finish an instruction once its reads are done; may schedule writes."""
    p = m.program
    lay = p.layout
    K = p.K
    base = K
    ins = m.code[pc]
    op = ins[0]
    tag = pend[0]
    regs = pend[1] if len(pend) > 1 else ()

    def write_then(ops, nsp, npc):
        return ("io", tuple(ops), (), ("exec", npc, nsp, ("done",)))

    if tag == "done":
        return ("exec", pc, (), sp, ())
    if tag == "push":
        return ("exec", pc + 1, (), sp + 1, ())
    if tag == "pushread":
        return write_then([("wr", base + sp, regs[0])], sp + 1, pc + 1)
    if tag == "pushbits":
        v = 0
        for b in regs:
            v = (v << 1) | b
        return write_then([("wr", base + sp, v)], sp + 1, pc + 1)
    if tag == "binary":
        a, b = regs
        if op == "bin" and ins[1] == "land":
            v = int(bool(a) and bool(b))
        elif op == "bin":
            v = arith(ins[1], int(a), int(b))
        else:
            v = int(compare(ins[1], a, b))
        return write_then([("wr", base + sp - 2, v)], sp - 1, pc + 1)
    if tag == "builtin":
        v = call_builtin(ins[1], tuple(regs))
        n = ins[2]
        return write_then([("wr", base + sp - n, int(v))], sp - n + 1, pc + 1)
    if tag == "dropcall":
        n = ins[1]
        return write_then([("wr", base + sp - 1 - n, regs[0])], sp - n, pc + 1)
    # unary-read instructions
    v = regs[0]
    if op == "un":
        r = int(not v) if ins[1] == "not" else -int(v)
        return write_then([("wr", base + sp - 1, r)], sp, pc + 1)
    if op == "bool":
        return write_then([("wr", base + sp - 1, int(bool(v)))], sp, pc + 1)
    if op == "jf":
        return ("exec", pc + 1 if v else ins[1], (), sp - 1, ())
    if op == "jshort":
        kind = ins[1]
        short = (kind == "and" and not v) or (kind == "or" and v)
        if short:
            return write_then([("wr", base + sp - 1, int(bool(v)))], sp, ins[2])
        return ("exec", pc + 1, (), sp - 1, ())
    if op == "store":
        name, last = ins[1], ins[2]
        f = lay.field(name)
        fd = p.field_decl(name)
        val = coerce_field(fd, v, f.width, None, name)
        ops = [("wr", f.offset + j, b) for j, b in enumerate(_bits_of(val, f.width))]
        return write_then(ops, sp - 1 if last else sp, pc + 1)
    if op == "put":
        return write_then([("wr", base + ins[1], v)], sp - 1, pc + 1)
    raise ValueError(f"unknown pending {tag!r} for {ins!r}")

