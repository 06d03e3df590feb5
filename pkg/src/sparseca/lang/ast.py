"""AST node types of the rule language.

Nodes are frozen dataclasses; source positions are carried but ignored by
equality, so two programs are structurally equal when their trees match.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields, is_dataclass, replace
from typing import Any, Callable, Optional

Pos = Optional[tuple]


def _pos():
    return field(default=None, compare=False, repr=False)


# ------------------------------------------------------------ expressions

@dataclass(frozen=True)
class Num:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = _pos()


@dataclass(frozen=True)
class Str:
    value: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Ref:
    name: str
    nb: str = ""  # "" own cell, "-" left neighbor, "+" right neighbor
    pos: Pos = _pos()


@dataclass(frozen=True)
class This:
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Bin:
    op: str  # + - * div mod and or
    left: Any
    right: Any
    pos: Pos = _pos()


@dataclass(frozen=True)
class Cmp:
    ops: tuple  # chained comparison operators
    items: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # - not
    operand: Any
    pos: Pos = _pos()


@dataclass(frozen=True)
class Index:
    target: Any
    index: Any
    pos: Pos = _pos()


# ------------------------------------------------------------- statements

@dataclass(frozen=True)
class If:
    branches: tuple  # ((cond, (stmt, ...)), ...)
    orelse: Optional[tuple] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Assign:
    targets: tuple  # (Ref, ...)
    value: Any
    pos: Pos = _pos()


@dataclass(frozen=True)
class CallStmt:
    call: Call
    pos: Pos = _pos()


@dataclass(frozen=True)
class Return:
    value: Any = None
    pos: Pos = _pos()


# ----------------------------------------------------------- declarations

@dataclass(frozen=True)
class ParamDecl:
    kind: str  # num bool enum string
    name: str
    value: Any
    pos: Pos = _pos()


@dataclass(frozen=True)
class FieldDecl:
    kind: str  # num bool enum bits
    name: str
    bound: Any = None
    labels: tuple = ()
    length: Optional[int] = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class Proc:
    name: str
    params: tuple
    body: tuple
    pos: Pos = _pos()


@dataclass(frozen=True)
class Program:
    decls: tuple  # ParamDecl | FieldDecl in declaration order
    procs: tuple
    body: tuple

    @property
    def params(self) -> tuple:
        return tuple(d for d in self.decls if isinstance(d, ParamDecl))

    @property
    def fields(self) -> tuple:
        return tuple(d for d in self.decls if isinstance(d, FieldDecl))


# ----------------------------------------------------------------- walking

def children(node) -> list:
    out = []
    if not is_dataclass(node):
        return out
    for f in fields(node):
        if f.name == "pos":
            continue
        out.extend(_flatten(getattr(node, f.name)))
    return out


def _flatten(v) -> list:
    if isinstance(v, tuple):
        res = []
        for x in v:
            res.extend(_flatten(x))
        return res
    if is_dataclass(v):
        return [v]
    return []


def walk(node):
    """Yield node and all descendants (pre-order)."""
    stack = [node]
    while stack:
        n = stack.pop()
        yield n
        stack.extend(reversed(children(n)))


def transform(node, fn: Callable):
    """Rebuild a tree bottom-up; fn(node) returns a replacement node."""
    if isinstance(node, tuple):
        return tuple(transform(x, fn) for x in node)
    if not is_dataclass(node):
        return node
    changes = {}
    for f in fields(node):
        if f.name == "pos":
            continue
        v = getattr(node, f.name)
        nv = transform(v, fn)
        if nv is not v:
            changes[f.name] = nv
    new = replace(node, **changes) if changes else node
    return fn(new)
