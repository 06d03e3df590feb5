"""Lexer and recursive-descent parser for the rule language.

Grammar (one statement per line, ``#`` starts a comment)::

    program   := decl* proc* stmt+
    decl      := ("num"|"bool"|"enum"|"string") "param" NAME "=" expr
               | "num" "field" NAME "<=" expr
               | "bool" "field" NAME
               | "enum" "field" NAME "in" "{" NAME ("," NAME)* "}"
               | "bits" "field" NAME "len" ONES
    proc      := "proc" NAME "(" [NAME ("," NAME)*] ")" stmt* "end"
    stmt      := "if" expr stmt* ("elsif" expr stmt*)* ["else" stmt*] "end"
               | NAME ("," NAME)* "<-" expr
               | NAME "(" args ")"
               | "return" [expr]

Expression precedence, loosest first: or, and, not, comparisons (chained),
mod, + -, * div, unary -, indexing ``S[i]``.  ``mod`` binds looser than
addition so that ``Age + 1 mod WPeriod`` reads as ``(Age + 1) mod WPeriod``.
A name immediately followed by ``-`` or ``+`` (and then a non-word
character) reads the left or right neighbor's field.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import SparseCAError
from . import ast as A

KEYWORDS = {
    "num", "bool", "enum", "bits", "string", "param", "field", "proc", "end", "if",
    "elsif", "else", "in", "len", "and", "or", "not", "mod", "div", "true", "false",
    "return", "This",
}
CMP_OPS = ("=", "!=", "<", "<=", ">", ">=")
SYMBOLS = ("<-", "<=", ">=", "!=", "=", "<", ">", "+", "-", "*", "(", ")", "{", "}",
           "[", "]", ",")


class ProgramError(SparseCAError):
    """A located problem in a program (syntax, resolution or typing)."""

    def __init__(self, kind: str, message: str, pos=None):
        self.kind = kind
        self.message = message
        self.pos = pos
        where = f" at line {pos[0]}, column {pos[1]}" if pos else ""
        super().__init__(f"{kind} error{where}: {message}")


class DSLSyntaxError(ProgramError):
    def __init__(self, message: str, pos=None):
        super().__init__("syntax", message, pos)


@dataclass(frozen=True)
class Token:
    kind: str  # NAME NB NUM STR SYM KW NL EOF
    value: object
    pos: tuple


def _is_word(ch: str) -> bool:
    return ch.isalnum() or ch == "_"


ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"'}


def tokenize(text: str) -> list[Token]:
    toks: list[Token] = []
    line, col = 1, 1
    i = 0
    depth = 0
    n = len(text)
    while i < n:
        ch = text[i]
        pos = (line, col)
        if ch == "\n":
            if depth == 0:
                toks.append(Token("NL", None, pos))
            i += 1
            line, col = line + 1, 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            if j < n and _is_word(text[j]):
                raise DSLSyntaxError(f"malformed number {text[i:j + 1]!r}", pos)
            toks.append(Token("NUM", int(text[i:j]), pos))
            col += j - i
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and _is_word(text[j]):
                j += 1
            word = text[i:j]
            col += j - i
            i = j
            if word in KEYWORDS:
                toks.append(Token("KW", word, pos))
                continue
            # neighbor suffix: NAME- or NAME+ not followed by a word char or '('
            if (i < n and text[i] in "-+" and (i + 1 >= n or not (_is_word(text[i + 1])
                                                                     or text[i + 1] in "(-+"))):
                toks.append(Token("NB", (word, text[i]), pos))
                i += 1
                col += 1
            else:
                toks.append(Token("NAME", word, pos))
            continue
        if ch == '"':
            j = i + 1
            buf = []
            while True:
                if j >= n or text[j] == "\n":
                    raise DSLSyntaxError("unterminated string literal", pos)
                c = text[j]
                if c == '"':
                    break
                if c == "\\":
                    if j + 1 >= n or text[j + 1] not in ESCAPES:
                        raise DSLSyntaxError("bad escape in string literal", (line, col + j - i))
                    buf.append(ESCAPES[text[j + 1]])
                    j += 2
                    continue
                buf.append(c)
                j += 1
            toks.append(Token("STR", "".join(buf), pos))
            col += j + 1 - i
            i = j + 1
            continue
        for sym in SYMBOLS:
            if text.startswith(sym, i):
                toks.append(Token("SYM", sym, pos))
                if sym in "([{":
                    depth += 1
                elif sym in ")]}":
                    depth = max(0, depth - 1)
                i += len(sym)
                col += len(sym)
                break
        else:
            raise DSLSyntaxError(f"unexpected character {ch!r}", pos)
    toks.append(Token("NL", None, (line, col)))
    toks.append(Token("EOF", None, (line, col)))
    return toks


class Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.k = 0

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.k]

    def at(self, kind: str, value=None) -> bool:
        t = self.tok
        return t.kind == kind and (value is None or t.value == value)

    def at_kw(self, *words) -> bool:
        return self.tok.kind == "KW" and self.tok.value in words

    def take(self, kind: str, value=None) -> Token:
        t = self.tok
        if not self.at(kind, value):
            want = value if value is not None else kind
            got = t.value if t.value is not None else t.kind
            raise DSLSyntaxError(f"expected {want!r}, found {got!r}", t.pos)
        self.k += 1
        return t

    def skip_nl(self):
        while self.at("NL"):
            self.k += 1

    def end_line(self):
        if not self.at("NL"):
            t = self.tok
            raise DSLSyntaxError(f"unexpected {t.value!r} at end of statement", t.pos)
        self.skip_nl()

    # -- program
    def program(self) -> A.Program:
        self.skip_nl()
        decls = []
        while self.at_kw("num", "bool", "enum", "bits", "string"):
            decls.append(self.decl())
        procs = []
        while self.at_kw("proc"):
            procs.append(self.proc())
        body = self.block(("EOF",))
        if not self.at("EOF"):
            t = self.tok
            raise DSLSyntaxError(f"unexpected {t.value!r}", t.pos)
        if not body:
            raise DSLSyntaxError("program body is missing", self.tok.pos)
        return A.Program(tuple(decls), tuple(procs), tuple(body))

    def decl(self):
        kind_tok = self.take("KW")
        kind = kind_tok.value
        pos = kind_tok.pos
        if self.at_kw("param"):
            self.k += 1
            if kind == "bits":
                raise DSLSyntaxError("bits params are not supported; use string", pos)
            name = self.take("NAME").value
            self.take("SYM", "=")
            value = self.expr()
            self.end_line()
            return A.ParamDecl(kind, name, value, pos)
        self.take("KW", "field")
        name = self.take("NAME").value
        if kind == "num":
            self.take("SYM", "<=")
            bound = self.expr()
            self.end_line()
            return A.FieldDecl("num", name, bound, pos=pos)
        if kind == "bool":
            self.end_line()
            return A.FieldDecl("bool", name, pos=pos)
        if kind == "enum":
            self.take("KW", "in")
            self.take("SYM", "{")
            labels = [self.take("NAME").value]
            while self.at("SYM", ","):
                self.k += 1
                labels.append(self.take("NAME").value)
            self.take("SYM", "}")
            self.end_line()
            return A.FieldDecl("enum", name, labels=tuple(labels), pos=pos)
        if kind == "bits":
            self.take("KW", "len")
            t = self.take("NUM")
            s = str(t.value)
            if set(s) != {"1"}:
                raise DSLSyntaxError("bitstring length must be written in unary (1s)", t.pos)
            self.end_line()
            return A.FieldDecl("bits", name, length=len(s), pos=pos)
        raise DSLSyntaxError(f"{kind} fields are not supported", pos)

    def proc(self) -> A.Proc:
        pos = self.take("KW", "proc").pos
        name = self.take("NAME").value
        self.take("SYM", "(")
        params = []
        if not self.at("SYM", ")"):
            params.append(self.take("NAME").value)
            while self.at("SYM", ","):
                self.k += 1
                params.append(self.take("NAME").value)
        self.take("SYM", ")")
        self.end_line()
        body = self.block(("end",))
        self.take("KW", "end")
        self.end_line()
        return A.Proc(name, tuple(params), tuple(body), pos)

    def block(self, stops) -> list:
        out = []
        while True:
            self.skip_nl()
            if self.at("EOF") or (self.tok.kind == "KW" and self.tok.value in stops):
                return out
            out.append(self.stmt())

    def stmt(self):
        t = self.tok
        if self.at_kw("if"):
            self.k += 1
            branches = []
            cond = self.expr()
            self.end_line()
            body = self.block(("elsif", "else", "end"))
            branches.append((cond, tuple(body)))
            orelse = None
            while self.at_kw("elsif"):
                self.k += 1
                cond = self.expr()
                self.end_line()
                body = self.block(("elsif", "else", "end"))
                branches.append((cond, tuple(body)))
            if self.at_kw("else"):
                self.k += 1
                self.end_line()
                orelse = tuple(self.block(("end",)))
            self.take("KW", "end")
            self.end_line()
            return A.If(tuple(branches), orelse, t.pos)
        if self.at_kw("return"):
            self.k += 1
            value = None if self.at("NL") else self.expr()
            self.end_line()
            return A.Return(value, t.pos)
        if t.kind == "NAME" and self.toks[self.k + 1].kind == "SYM" and self.toks[self.k + 1].value == "(":
            call = self.atom()
            self.end_line()
            return A.CallStmt(call, t.pos)
        if t.kind in ("NAME", "NB"):
            targets = [self.target()]
            while self.at("SYM", ","):
                self.k += 1
                targets.append(self.target())
            self.take("SYM", "<-")
            value = self.expr()
            self.end_line()
            return A.Assign(tuple(targets), value, t.pos)
        raise DSLSyntaxError(f"unexpected {t.value if t.value is not None else t.kind!r}", t.pos)

    def target(self) -> A.Ref:
        t = self.tok
        if t.kind == "NAME":
            self.k += 1
            return A.Ref(t.value, "", t.pos)
        if t.kind == "NB":
            self.k += 1
            return A.Ref(t.value[0], t.value[1], t.pos)
        raise DSLSyntaxError("expected an assignment target", t.pos)

    # -- expressions
    def expr(self):
        return self.or_expr()

    def or_expr(self):
        left = self.and_expr()
        while self.at_kw("or"):
            pos = self.tok.pos
            self.k += 1
            left = A.Bin("or", left, self.and_expr(), pos)
        return left

    def and_expr(self):
        left = self.not_expr()
        while self.at_kw("and"):
            pos = self.tok.pos
            self.k += 1
            left = A.Bin("and", left, self.not_expr(), pos)
        return left

    def not_expr(self):
        if self.at_kw("not"):
            pos = self.tok.pos
            self.k += 1
            return A.Unary("not", self.not_expr(), pos)
        return self.cmp_expr()

    def cmp_expr(self):
        first = self.mod_expr()
        ops, items = [], [first]
        while self.tok.kind == "SYM" and self.tok.value in CMP_OPS:
            ops.append(self.tok.value)
            self.k += 1
            items.append(self.mod_expr())
        if not ops:
            return first
        return A.Cmp(tuple(ops), tuple(items), getattr(first, "pos", None))

    def mod_expr(self):
        left = self.add_expr()
        while self.at_kw("mod"):
            pos = self.tok.pos
            self.k += 1
            left = A.Bin("mod", left, self.add_expr(), pos)
        return left

    def add_expr(self):
        left = self.mul_expr()
        while self.tok.kind == "SYM" and self.tok.value in ("+", "-"):
            op, pos = self.tok.value, self.tok.pos
            self.k += 1
            left = A.Bin(op, left, self.mul_expr(), pos)
        return left

    def mul_expr(self):
        left = self.unary_expr()
        while (self.tok.kind == "SYM" and self.tok.value == "*") or self.at_kw("div"):
            op, pos = self.tok.value, self.tok.pos
            self.k += 1
            left = A.Bin(op, left, self.unary_expr(), pos)
        return left

    def unary_expr(self):
        if self.at("SYM", "-"):
            pos = self.tok.pos
            self.k += 1
            return A.Unary("-", self.unary_expr(), pos)
        return self.postfix_expr()

    def postfix_expr(self):
        node = self.atom()
        while self.at("SYM", "["):
            pos = self.tok.pos
            self.k += 1
            idx = self.expr()
            self.take("SYM", "]")
            node = A.Index(node, idx, pos)
        return node

    def atom(self):
        t = self.tok
        if t.kind == "NUM":
            self.k += 1
            return A.Num(t.value, t.pos)
        if t.kind == "STR":
            self.k += 1
            return A.Str(t.value, t.pos)
        if t.kind == "NB":
            self.k += 1
            return A.Ref(t.value[0], t.value[1], t.pos)
        if t.kind == "KW" and t.value in ("true", "false"):
            self.k += 1
            return A.BoolLit(t.value == "true", t.pos)
        if t.kind == "KW" and t.value == "This":
            self.k += 1
            return A.This(t.pos)
        if t.kind == "NAME":
            self.k += 1
            if self.at("SYM", "("):
                self.k += 1
                args = []
                if not self.at("SYM", ")"):
                    args.append(self.expr())
                    while self.at("SYM", ","):
                        self.k += 1
                        args.append(self.expr())
                self.take("SYM", ")")
                return A.Call(t.value, tuple(args), t.pos)
            return A.Ref(t.value, "", t.pos)
        if t.kind == "SYM" and t.value == "(":
            self.k += 1
            e = self.expr()
            self.take("SYM", ")")
            return e
        raise DSLSyntaxError(f"unexpected {t.value if t.value is not None else t.kind!r} in expression",
                             t.pos)


def parse_ast(text: str) -> A.Program:
    return Parser(text).program()


def parse_expr(text: str):
    p = Parser(text)
    e = p.expr()
    p.skip_nl()
    if not p.at("EOF"):
        raise DSLSyntaxError("trailing input after expression", p.tok.pos)
    return e
