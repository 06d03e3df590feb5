"""Canonical printing of rule-language ASTs."""
from __future__ import annotations

from . import ast as A

PREC = {"or": 1, "and": 2, "not": 3, "cmp": 4, "mod": 5, "+": 6, "-": 6, "*": 7, "div": 7,
        "neg": 8, "index": 9, "atom": 10}
INDENT = "  "


def escape(s: str) -> str:
    return (s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")
            .replace("\t", "\\t"))


def prec_of(e) -> int:
    if isinstance(e, A.Bin):
        return PREC[e.op]
    if isinstance(e, A.Cmp):
        return PREC["cmp"]
    if isinstance(e, A.Unary):
        return PREC["not"] if e.op == "not" else PREC["neg"]
    if isinstance(e, A.Index):
        return PREC["index"]
    return PREC["atom"]


def _wrap(e, min_prec: int) -> str:
    s = expr_text(e)
    return f"({s})" if prec_of(e) < min_prec else s


def expr_text(e) -> str:
    if isinstance(e, A.Num):
        return str(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.Str):
        return f'"{escape(e.value)}"'
    if isinstance(e, A.Ref):
        return e.name + e.nb
    if isinstance(e, A.This):
        return "This"
    if isinstance(e, A.Call):
        return f"{e.name}({', '.join(expr_text(a) for a in e.args)})"
    if isinstance(e, A.Bin):
        p = PREC[e.op]
        return f"{_wrap(e.left, p)} {e.op} {_wrap(e.right, p + 1)}"
    if isinstance(e, A.Cmp):
        p = PREC["cmp"] + 1
        parts = [_wrap(e.items[0], p)]
        for op, it in zip(e.ops, e.items[1:]):
            parts.append(op)
            parts.append(_wrap(it, p))
        return " ".join(parts)
    if isinstance(e, A.Unary):
        if e.op == "not":
            return f"not {_wrap(e.operand, PREC['not'])}"
        inner = _wrap(e.operand, PREC["neg"])
        return f"-{inner}"
    if isinstance(e, A.Index):
        return f"{_wrap(e.target, PREC['index'])}[{expr_text(e.index)}]"
    raise TypeError(f"not an expression: {e!r}")


def stmt_lines(s, depth: int) -> list[str]:
    pad = INDENT * depth
    if isinstance(s, A.Assign):
        targets = ", ".join(t.name + t.nb for t in s.targets)
        return [f"{pad}{targets} <- {expr_text(s.value)}"]
    if isinstance(s, A.CallStmt):
        return [pad + expr_text(s.call)]
    if isinstance(s, A.Return):
        return [pad + ("return" if s.value is None else f"return {expr_text(s.value)}")]
    if isinstance(s, A.If):
        out = []
        for k, (cond, body) in enumerate(s.branches):
            kw = "if" if k == 0 else "elsif"
            out.append(f"{pad}{kw} {expr_text(cond)}")
            out += block_lines(body, depth + 1)
        if s.orelse is not None:
            out.append(pad + "else")
            out += block_lines(s.orelse, depth + 1)
        out.append(pad + "end")
        return out
    raise TypeError(f"not a statement: {s!r}")


def block_lines(body, depth: int) -> list[str]:
    out = []
    for s in body:
        out += stmt_lines(s, depth)
    return out


def decl_line(d) -> str:
    if isinstance(d, A.ParamDecl):
        return f"{d.kind} param {d.name} = {expr_text(d.value)}"
    if d.kind == "num":
        return f"num field {d.name} <= {expr_text(d.bound)}"
    if d.kind == "bool":
        return f"bool field {d.name}"
    if d.kind == "enum":
        return f"enum field {d.name} in {{{', '.join(d.labels)}}}"
    if d.kind == "bits":
        return f"bits field {d.name} len {'1' * d.length}"
    raise TypeError(f"not a declaration: {d!r}")


def program_text(p: A.Program) -> str:
    sections = []
    if p.decls:
        sections.append("\n".join(decl_line(d) for d in p.decls))
    for proc in p.procs:
        lines = [f"proc {proc.name}({', '.join(proc.params)})"]
        lines += block_lines(proc.body, 1)
        lines.append("end")
        sections.append("\n".join(lines))
    sections.append("\n".join(block_lines(p.body, 0)))
    return "\n\n".join(sections) + "\n"
