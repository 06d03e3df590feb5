"""Reference tree-walking evaluator with an optional cost meter.

Time is the number of AST nodes evaluated plus builtin costs; space is the
peak of simultaneously held temporaries (in bits).  The state copy itself is
added by the caller.
"""
from __future__ import annotations

from . import ast as A
from .builtins import BUILTINS, call_builtin
from .values import Bits, size_bits


class Meter:
    __slots__ = ("time", "held", "peak")

    def __init__(self):
        self.time = 0
        self.held = 0
        self.peak = 0

    def tick(self, n: int = 1):
        self.time += n

    def note(self, extra: int):
        v = self.held + extra
        if v > self.peak:
            self.peak = v


class _Return(Exception):
    def __init__(self, value):
        self.value = value


def coerce_field(fd, value, width: int, diagnostics: list | None, name: str) -> int:
    """Turn a runtime value into the stored int of a field."""
    if fd.kind == "bool":
        if isinstance(value, Bits):
            return 1 if value.value else 0
        return 1 if value else 0
    if fd.kind == "bits":
        if isinstance(value, Bits):
            if value.length != width and diagnostics is not None:
                diagnostics.append(f"bits field {name}: length {value.length} fitted to {width}")
            if value.length >= width:
                return value.value >> (value.length - width)
            return value.value << (width - value.length)
        v = int(value)
    else:
        v = int(value)
    if v < 0 or v >= (1 << width):
        if diagnostics is not None:
            diagnostics.append(f"field {name}: value {v} reduced mod 2^{width}")
        v %= 1 << width
    return v


class Evaluator:
    def __init__(self, program, meter: Meter | None = None, diagnostics: list | None = None):
        self.p = program
        self.meter = meter
        self.diag = diagnostics
        self.layout = None
        self.own: dict = {}
        self.nbr: dict = {}

    # ------------------------------------------------------------- running
    def run(self, a: int, b: int, c: int) -> int:
        lay = self.p.layout
        self.layout = lay
        self.own = lay.unpack(b)
        self.nbr = {"-": lay.unpack(a), "+": lay.unpack(c)}
        self.exec_block(self.p.ast.body, {})
        s = 0
        for f in lay.fields:
            s |= self.own[f.name] << (lay.K - f.offset - f.width)
        return s

    def const(self, e):
        return self.eval(e, {})

    # ---------------------------------------------------------- statements
    def exec_block(self, body, env):
        for s in body:
            self.exec_stmt(s, env)

    def exec_stmt(self, s, env):
        m = self.meter
        if m is not None:
            m.tick()
        if isinstance(s, A.Assign):
            v = self.eval(s.value, env)
            for t in s.targets:
                fd = self.p.field_decl(t.name)
                w = self.layout.field(t.name).width
                self.own[t.name] = coerce_field(fd, v, w, self.diag, t.name)
        elif isinstance(s, A.If):
            for cond, body in s.branches:
                if self.eval(cond, env):
                    self.exec_block(body, env)
                    return
            if s.orelse is not None:
                self.exec_block(s.orelse, env)
        elif isinstance(s, A.CallStmt):
            self.eval(s.call, env)
        elif isinstance(s, A.Return):
            raise _Return(None if s.value is None else self.eval(s.value, env))
        else:
            raise TypeError(f"unknown statement {s!r}")

    # --------------------------------------------------------- expressions
    def read_field(self, name: str, nb: str):
        src = self.own if not nb else self.nbr[nb]
        v = src[name]
        fd = self.p.field_decl(name)
        if fd.kind == "bool":
            return bool(v)
        if fd.kind == "bits":
            return Bits(v, fd.length)
        return v

    def eval(self, e, env):
        m = self.meter
        if m is not None:
            m.tick()
        t = type(e)
        if t is A.Num:
            v = e.value
        elif t is A.BoolLit:
            v = e.value
        elif t is A.Str:
            v = Bits.from_text(e.value)
        elif t is A.Ref:
            if e.nb:
                v = self.read_field(e.name, e.nb)
            elif e.name in env:
                v = env[e.name]
            elif self.p.is_field(e.name):
                v = self.read_field(e.name, "")
            elif self.p.is_param(e.name):
                v, pt, ps = self.p.param_info(e.name)
                if m is not None:
                    m.tick(pt)
                    m.note(ps)
            else:
                v = self.p.label_index(e.name)
        elif t is A.This:
            v = self.p.this_bits
        elif t is A.Bin:
            v = self._bin(e, env)
        elif t is A.Cmp:
            v = self._cmp(e, env)
        elif t is A.Unary:
            x = self.eval(e.operand, env)
            v = (not x) if e.op == "not" else -int(x)
        elif t is A.Index:
            s = self.eval(e.target, env)
            if m is not None:
                m.held += size_bits(s)
            i = self.eval(e.index, env)
            if m is not None:
                m.held -= size_bits(s)
                m.tick(max(1, int(i).bit_length()))
            v = s.bit(int(i)) if isinstance(s, Bits) else 0
        elif t is A.Call:
            v = self._call(e, env)
        else:
            raise TypeError(f"unknown expression {e!r}")
        if m is not None:
            m.note(size_bits(v))
        return v

    def _bin(self, e, env):
        m = self.meter
        op = e.op
        if op == "and":
            return bool(self.eval(e.left, env)) and bool(self.eval(e.right, env))
        if op == "or":
            return bool(self.eval(e.left, env)) or bool(self.eval(e.right, env))
        a = self.eval(e.left, env)
        if m is not None:
            m.held += size_bits(a)
        b = self.eval(e.right, env)
        if m is not None:
            m.held -= size_bits(a)
        return arith(op, int(a), int(b))

    def _cmp(self, e, env):
        m = self.meter
        left = self.eval(e.items[0], env)
        for op, item in zip(e.ops, e.items[1:]):
            if m is not None:
                m.held += size_bits(left)
            right = self.eval(item, env)
            if m is not None:
                m.held -= size_bits(left)
            if not compare(op, left, right):
                return False
            left = right
        return True

    def _call(self, e, env):
        m = self.meter
        args = []
        held = 0
        for a in e.args:
            v = self.eval(a, env)
            args.append(v)
            if m is not None:
                sz = size_bits(v)
                m.held += sz
                held += sz
        try:
            proc = self.p.proc(e.name)
            if proc is not None:
                local = dict(zip(proc.params, args))
                try:
                    self.exec_block(proc.body, local)
                    result = None
                except _Return as r:
                    result = r.value
            else:
                b = BUILTINS[e.name]
                result = call_builtin(e.name, tuple(args))
                if m is not None:
                    m.tick(b.time_cost(args, result))
                    m.note(b.space_cost(args, result))
        finally:
            if m is not None:
                m.held -= held
        return False if result is None else result


def arith(op: str, a: int, b: int) -> int:
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "div":
        return a // b if b else 0
    if op == "mod":
        return a % b if b else 0
    raise ValueError(op)


def compare(op: str, a, b) -> bool:
    if isinstance(a, bool):
        a = int(a)
    if isinstance(b, bool):
        b = int(b)
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b
