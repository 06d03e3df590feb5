"""Name resolution and static validation of rule programs."""
from __future__ import annotations

from . import ast as A
from .builtins import BUILTINS
from .parser import ProgramError

RESOLUTION_KINDS = ("duplicate", "unresolved")

ARITH = ("+", "-", "*", "div", "mod")
LOGIC = ("and", "or")
ORDER = ("<", "<=", ">", ">=")


def field_type(d: A.FieldDecl):
    if d.kind == "bool":
        return "bool"
    if d.kind == "num":
        return "num"
    if d.kind == "enum":
        return ("enum", d.labels)
    return "str"


def _scalar(t) -> bool:
    return t in ("num", "bool", "any")


def compatible(a, b) -> bool:
    if a == "any" or b == "any":
        return True
    if _scalar(a) and _scalar(b):
        return True
    return a == b


def assignable(target, value) -> bool:
    if value == "any":
        return True
    if target in ("bool", "num"):
        return value in ("bool", "num")
    if target == "str":
        return value in ("str", "num")
    return target == value


class Checker:
    def __init__(self, prog: A.Program):
        self.prog = prog
        self.errors: list[ProgramError] = []
        self.params: dict[str, A.ParamDecl] = {}
        self.param_types: dict[str, object] = {}
        self.fields: dict[str, A.FieldDecl] = {}
        self.labels: dict[str, tuple] = {}
        self.procs: dict[str, A.Proc] = {}

    def err(self, kind: str, msg: str, node=None):
        self.errors.append(ProgramError(kind, msg, getattr(node, "pos", None)))

    # ---------------------------------------------------------------- run
    def run(self) -> list[ProgramError]:
        taken: dict[str, str] = {}

        def claim(name, what, node):
            if name in taken or name in BUILTINS:
                prev = taken.get(name, "builtin")
                self.err("duplicate", f"{what} {name!r} clashes with {prev} of the same name", node)
                return False
            taken[name] = what
            return True

        for d in self.prog.decls:
            if isinstance(d, A.FieldDecl) and d.kind == "enum":
                if len(set(d.labels)) != len(d.labels):
                    self.err("duplicate", f"repeated label in enum field {d.name!r}", d)
                for lab in d.labels:
                    if lab in self.labels:
                        if self.labels[lab] != d.labels:
                            self.err("duplicate", f"label {lab!r} used by two different enums", d)
                        continue
                    if claim(lab, "label", d):
                        self.labels[lab] = d.labels
        for d in self.prog.decls:
            if isinstance(d, A.ParamDecl):
                self.check_const(d.value, d)
                t = self.expr_type(d.value, frozenset(), const=True)
                want = {"num": "num", "bool": "bool", "string": "str"}.get(d.kind)
                if d.kind == "enum":
                    if not (isinstance(t, tuple) or t == "any"):
                        self.err("type", f"enum param {d.name!r} needs a label value", d)
                elif want is not None and t not in (want, "any") and not (
                        want in ("num", "bool") and t in ("num", "bool")):
                    self.err("type", f"param {d.name!r} declared {d.kind} but value is {t}", d)
                if claim(d.name, "param", d):
                    self.params[d.name] = d
                    self.param_types[d.name] = t if d.kind == "enum" else (want or t)
            else:
                if d.kind == "num":
                    self.check_const(d.bound, d)
                    t = self.expr_type(d.bound, frozenset(), const=True)
                    if t not in ("num", "any"):
                        self.err("type", f"bound of field {d.name!r} must be a number", d)
                if d.kind == "bits" and (d.length or 0) < 1:
                    self.err("width", f"bits field {d.name!r} needs positive length", d)
                if claim(d.name, "field", d):
                    self.fields[d.name] = d
        for p in self.prog.procs:
            if claim(p.name, "procedure", p):
                self.procs[p.name] = p
            if len(set(p.params)) != len(p.params):
                self.err("duplicate", f"repeated formal in procedure {p.name!r}", p)
            for f in p.params:
                if f in taken or f in BUILTINS:
                    self.err("duplicate", f"formal {f!r} of {p.name!r} shadows a global name", p)
        for p in self.prog.procs:
            self.check_block(p.body, frozenset(p.params), in_proc=True)
        self.check_block(self.prog.body, frozenset(), in_proc=False)
        self.check_recursion()
        return self.errors

    def check_const(self, e, decl):
        for n in A.walk(e):
            if isinstance(n, A.Ref) and (n.nb or n.name in self.fields):
                self.err("type", f"declaration {decl.name!r} may not read fields", n)

    # ---------------------------------------------------------- statements
    def check_block(self, body, local: frozenset, in_proc: bool):
        for s in body:
            self.check_stmt(s, local, in_proc)

    def check_stmt(self, s, local, in_proc):
        if isinstance(s, A.Assign):
            vt = self.expr_type(s.value, local)
            for t in s.targets:
                if t.nb:
                    self.err("neighbor-write", f"cannot assign to neighbor field {t.name}{t.nb}", t)
                elif t.name in local:
                    self.err("local-write", f"cannot assign to formal {t.name!r}", t)
                elif t.name in self.params:
                    self.err("param-write", f"cannot assign to param {t.name!r}", t)
                elif t.name not in self.fields:
                    self.err("unresolved", f"unknown field {t.name!r}", t)
                else:
                    ft = field_type(self.fields[t.name])
                    if not assignable(ft, vt):
                        self.err("type", f"cannot assign {vt} to field {t.name!r} of type {ft}", s)
        elif isinstance(s, A.CallStmt):
            self.expr_type(s.call, local)
        elif isinstance(s, A.Return):
            if not in_proc:
                self.err("return", "return outside a procedure", s)
            if s.value is not None:
                self.expr_type(s.value, local)
        elif isinstance(s, A.If):
            for cond, body in s.branches:
                ct = self.expr_type(cond, local)
                if ct not in ("bool", "any"):
                    self.err("type", f"condition must be boolean, found {ct}", cond)
                self.check_block(body, local, in_proc)
            if s.orelse is not None:
                self.check_block(s.orelse, local, in_proc)

    # --------------------------------------------------------- expressions
    def expr_type(self, e, local: frozenset, const: bool = False):
        if isinstance(e, A.Num):
            return "num"
        if isinstance(e, A.BoolLit):
            return "bool"
        if isinstance(e, (A.Str, A.This)):
            return "str"
        if isinstance(e, A.Ref):
            if e.nb:
                if e.name not in self.fields:
                    self.err("unresolved", f"neighbor read of unknown field {e.name!r}", e)
                    return "any"
                return field_type(self.fields[e.name])
            if e.name in local:
                return "any"
            if e.name in self.fields:
                return field_type(self.fields[e.name])
            if e.name in self.params:
                return self.param_types[e.name]
            if e.name in self.labels:
                return ("enum", self.labels[e.name])
            self.err("unresolved", f"unknown name {e.name!r}", e)
            return "any"
        if isinstance(e, A.Call):
            arg_types = [self.expr_type(a, local, const) for a in e.args]
            if e.name in self.procs and not const:
                p = self.procs[e.name]
                if len(p.params) != len(e.args):
                    self.err("arity", f"{e.name} expects {len(p.params)} arguments", e)
                return "any"
            if e.name in BUILTINS:
                b = BUILTINS[e.name]
                if len(b.arg_types) != len(e.args):
                    self.err("arity", f"{e.name} expects {len(b.arg_types)} arguments", e)
                else:
                    for want, got in zip(b.arg_types, arg_types):
                        if want != "any" and not compatible(want, got) or (
                                want == "str" and got not in ("str", "any")):
                            self.err("type", f"{e.name} argument: expected {want}, found {got}", e)
                return b.ret_type
            self.err("unresolved", f"unknown procedure or builtin {e.name!r}", e)
            return "any"
        if isinstance(e, A.Bin):
            lt = self.expr_type(e.left, local, const)
            rt = self.expr_type(e.right, local, const)
            if e.op in ARITH:
                for t, side in ((lt, e.left), (rt, e.right)):
                    if t not in ("num", "any"):
                        self.err("type", f"operator {e.op} needs numbers, found {t}", side)
                return "num"
            for t, side in ((lt, e.left), (rt, e.right)):
                if t not in ("bool", "any"):
                    self.err("type", f"operator {e.op} needs booleans, found {t}", side)
            return "bool"
        if isinstance(e, A.Unary):
            t = self.expr_type(e.operand, local, const)
            if e.op == "not":
                if t not in ("bool", "any"):
                    self.err("type", f"not needs a boolean, found {t}", e)
                return "bool"
            if t not in ("num", "any"):
                self.err("type", f"negation needs a number, found {t}", e)
            return "num"
        if isinstance(e, A.Cmp):
            types = [self.expr_type(x, local, const) for x in e.items]
            for op, a, b in zip(e.ops, types, types[1:]):
                if not compatible(a, b):
                    self.err("type", f"cannot compare {a} with {b}", e)
                elif op in ORDER and not (_scalar(a) and _scalar(b)):
                    self.err("type", f"operator {op} needs numbers", e)
            return "bool"
        if isinstance(e, A.Index):
            tt = self.expr_type(e.target, local, const)
            it = self.expr_type(e.index, local, const)
            if tt not in ("str", "any"):
                self.err("type", f"only strings can be indexed, found {tt}", e)
            if it not in ("num", "any"):
                self.err("type", f"index must be a number, found {it}", e)
            return "num"
        raise TypeError(f"unknown node {e!r}")

    # ---------------------------------------------------------- recursion
    def check_recursion(self):
        graph = {}
        for p in self.prog.procs:
            graph[p.name] = {n.name for s in p.body for n in A.walk(s)
                             if isinstance(n, A.Call) and n.name in self.procs}
        state: dict[str, int] = {}

        def visit(name, path):
            state[name] = 1
            for nxt in sorted(graph.get(name, ())):
                if state.get(nxt) == 1:
                    cyc = path[path.index(nxt):] + [nxt] if nxt in path else [name, nxt]
                    self.err("recursion", "recursive calls: " + " -> ".join(cyc),
                             self.procs[name])
                elif state.get(nxt) is None:
                    visit(nxt, path + [nxt])
            state[name] = 2

        for name in graph:
            if state.get(name) is None:
                visit(name, [name])


def check(prog: A.Program) -> list[ProgramError]:
    return Checker(prog).run()
