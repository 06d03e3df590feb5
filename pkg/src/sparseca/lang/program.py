"""RuleProgram: a checked AST with its canonical text, layout and params."""
from __future__ import annotations

import threading
from typing import Iterable

from ..core import FieldLayout
from ..errors import DecodeError, PreconditionError
from . import ast as A
from .check import RESOLUTION_KINDS, check
from .evaluator import Evaluator, Meter
from .parser import ProgramError, parse_ast
from .printer import program_text
from .values import Bits


class RuleProgram:
    """A parsed rule program.

    Equality is structural (positions ignored).  Params are evaluated lazily
    and memoized together with the cost of computing them; ``This`` is the
    UTF-8 encoding of the canonical text.
    """

    def __init__(self, ast: A.Program, errors: list[ProgramError] | None = None,
                 name: str = ""):
        self.ast = ast
        self.name = name
        self.errors = check(ast) if errors is None else errors
        self._text: str | None = None
        self._layout: FieldLayout | None = None
        self._params: dict = {}
        self._lock = threading.Lock()
        self._fields = {d.name: d for d in ast.fields}
        self._param_decls = {d.name: d for d in ast.params}
        self._procs = {p.name: p for p in ast.procs}
        self._labels = {}
        for d in ast.fields:
            if d.kind == "enum":
                for k, lab in enumerate(d.labels):
                    self._labels.setdefault(lab, k)
        self._this: Bits | None = None

    # ------------------------------------------------------------ identity
    def __eq__(self, other) -> bool:
        return isinstance(other, RuleProgram) and self.ast == other.ast

    def __hash__(self) -> int:
        return hash(self.text)

    def __repr__(self) -> str:
        return f"RuleProgram({self.name or '?'}, |p|={len(self.text)} chars, K={self.layout.K})"

    @property
    def text(self) -> str:
        if self._text is None:
            self._text = program_text(self.ast)
        return self._text

    @property
    def this_bits(self) -> Bits:
        if self._this is None:
            self._this = Bits.from_text(self.text)
        return self._this

    # -------------------------------------------------------------- lookup
    def is_field(self, name: str) -> bool:
        return name in self._fields

    def is_param(self, name: str) -> bool:
        return name in self._param_decls

    def field_decl(self, name: str) -> A.FieldDecl:
        return self._fields[name]

    def param_decl(self, name: str) -> A.ParamDecl:
        return self._param_decls[name]

    def proc(self, name: str):
        return self._procs.get(name)

    def label_index(self, name: str) -> int:
        return self._labels[name]

    @property
    def param_names(self) -> list[str]:
        return list(self._param_decls)

    @property
    def field_names(self) -> list[str]:
        return list(self._fields)

    def names(self) -> set[str]:
        return set(self._fields) | set(self._param_decls) | set(self._procs) | set(self._labels)

    # --------------------------------------------------------------- params
    def param_info(self, name: str) -> tuple:
        """(value, time cost, space cost) of a param, computed once."""
        hit = self._params.get(name)
        if hit is None:
            meter = Meter()
            ev = Evaluator(self, meter)
            v = ev.const(self._param_decls[name].value)
            hit = (v, meter.time, meter.peak)
            with self._lock:
                self._params[name] = hit
        return hit

    def param(self, name: str):
        return self.param_info(name)[0]

    # --------------------------------------------------------------- layout
    @property
    def layout(self) -> FieldLayout:
        if self._layout is None:
            specs = []
            for d in self.ast.fields:
                if d.kind == "num":
                    ev = Evaluator(self)
                    specs.append((d.name, "num", int(ev.const(d.bound))))
                elif d.kind == "enum":
                    specs.append((d.name, "enum", d.labels))
                elif d.kind == "bits":
                    specs.append((d.name, "bits", d.length))
                else:
                    specs.append((d.name, "bool"))
            self._layout = FieldLayout(specs, self.name)
        return self._layout

    @property
    def K(self) -> int:
        return self.layout.K


def _raise_resolution(errors: list[ProgramError]):
    for e in errors:
        if e.kind in RESOLUTION_KINDS:
            raise e


def parse(text: str, name: str = "") -> RuleProgram:
    """Parse source text; syntax and resolution errors raise ProgramError."""
    ast = parse_ast(text)
    errors = check(ast)
    _raise_resolution(errors)
    return RuleProgram(ast, errors, name)


def from_ast(ast: A.Program, name: str = "") -> RuleProgram:
    errors = check(ast)
    _raise_resolution(errors)
    return RuleProgram(ast, errors, name)


def validate(program: RuleProgram) -> list[ProgramError]:
    """All static problems of a program; an empty list means valid."""
    errors = list(program.errors)
    if errors:
        return errors
    for d in program.ast.fields:
        if d.kind == "num":
            try:
                m = int(Evaluator(program).const(d.bound))
            except Exception as exc:  # noqa: BLE001 - reported as data
                errors.append(ProgramError("width", f"bound of {d.name!r} failed: {exc}", d.pos))
                continue
            if m < 1:
                errors.append(ProgramError("width", f"field {d.name!r} has max value {m} < 1", d.pos))
        elif d.kind == "enum" and len(d.labels) < 2:
            errors.append(ProgramError("width", f"enum field {d.name!r} needs two labels", d.pos))
    return errors


def is_valid(program: RuleProgram) -> bool:
    return not validate(program)


def layout_of(program: RuleProgram) -> FieldLayout:
    return program.layout


def encode_bits(program: RuleProgram) -> Bits:
    return Bits.from_text(program.text)


def decode_bits(bits: Bits) -> RuleProgram:
    text = bits.to_text()
    try:
        return parse(text)
    except ProgramError as exc:
        raise DecodeError(f"decoded text does not parse: {exc}") from exc


def inc_level(program: RuleProgram) -> RuleProgram:
    """Copy of the program with its numeric Level param incremented."""
    found = False
    decls = []
    for d in program.ast.decls:
        if isinstance(d, A.ParamDecl) and d.name == "Level":
            if d.kind != "num" or not isinstance(d.value, A.Num):
                raise PreconditionError("Level must be a numeric literal param")
            d = A.ParamDecl("num", "Level", A.Num(d.value.value + 1), d.pos)
            found = True
        decls.append(d)
    if not found:
        raise PreconditionError("program has no Level param")
    ast = A.Program(tuple(decls), program.ast.procs, program.ast.body)
    return RuleProgram(ast, program.errors, program.name)


# ---------------------------------------------------------------- renaming

def rename(program: RuleProgram, mapping: dict[str, str]) -> A.Program:
    """Rename params, fields, procedures and labels; references follow."""
    if not mapping:
        return program.ast

    def fn(node):
        if isinstance(node, A.Ref) and node.name in mapping:
            return A.Ref(mapping[node.name], node.nb, node.pos)
        if isinstance(node, A.Call) and node.name in mapping:
            return A.Call(mapping[node.name], node.args, node.pos)
        if isinstance(node, A.ParamDecl) and node.name in mapping:
            return A.ParamDecl(node.kind, mapping[node.name], node.value, node.pos)
        if isinstance(node, A.FieldDecl):
            labels = tuple(mapping.get(x, x) for x in node.labels)
            return A.FieldDecl(node.kind, mapping.get(node.name, node.name), node.bound, labels,
                               node.length, node.pos)
        if isinstance(node, A.Proc) and node.name in mapping:
            return A.Proc(mapping[node.name], node.params, node.body, node.pos)
        return node

    # formals shadow globals inside their procedure; they are never renamed
    procs = []
    for p in program.ast.procs:
        inner = {k: v for k, v in mapping.items() if k not in p.params}
        body = _rename_body(p.body, inner)
        procs.append(A.Proc(mapping.get(p.name, p.name), p.params, body, p.pos))
    decls = A.transform(program.ast.decls, fn)
    body = A.transform(program.ast.body, fn)
    return A.Program(decls, tuple(procs), body)


def _rename_body(body, mapping):
    def fn(node):
        if isinstance(node, A.Ref) and node.name in mapping:
            return A.Ref(mapping[node.name], node.nb, node.pos)
        if isinstance(node, A.Call) and node.name in mapping:
            return A.Call(mapping[node.name], node.args, node.pos)
        return node
    return A.transform(body, fn)


def fresh_prefix(taken: Iterable[str], names: Iterable[str]) -> str:
    """Smallest u<k>_ prefix that makes every given name collision free."""
    taken = set(taken)
    names = list(names)
    k = 0
    while True:
        pre = f"u{k}_"
        if all(pre + n not in taken for n in names):
            return pre
        k += 1


def uses_this(program: RuleProgram) -> bool:
    return any(isinstance(n, A.This) for n in A.walk(program.ast))


def embed(inner: RuleProgram, reserved: Iterable[str], keep: Iterable[str] = ()):
    """Prepare a program for inclusion inside a transformed program.

    Names of ``inner`` that clash with ``reserved`` are renamed with a fresh
    ``u<k>_`` prefix, except those in ``keep``.  If ``inner`` reads ``This``,
    the reads are redirected to a new string param holding inner's own
    canonical text, so the embedded copy still refers to the original program.
    Returns (decls, procs, body, mapping).
    """
    reserved = set(reserved)
    keep = set(keep)
    own = inner.names()
    clash = sorted(n for n in own if n in reserved and n not in keep)
    extra = ["This"] if uses_this(inner) else []
    mapping = {}
    if clash or extra:
        pre = fresh_prefix(reserved | own, clash + extra)
        mapping = {n: pre + n for n in clash}
    ast = rename(inner, mapping)
    decls = list(ast.decls)
    if extra:
        this_name = pre + "This"
        text = inner.text

        def fn(node):
            if isinstance(node, A.This):
                return A.Ref(this_name, "", node.pos)
            return node
        decls = list(A.transform(tuple(decls), fn))
        procs = A.transform(ast.procs, fn)
        body = A.transform(ast.body, fn)
        decls.insert(0, A.ParamDecl("string", this_name, A.Str(text)))
        return tuple(decls), procs, body, mapping
    return tuple(decls), ast.procs, ast.body, mapping
