"""Registry of builtin functions callable from rule programs.

String-valued builtins (program transformations, IncLevel) are registered
by the modules that implement them; their cost is charged per byte touched.
"""
from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable

from .values import Bits


def byte_cost(*vals) -> int:
    total = 0
    for v in vals:
        if isinstance(v, Bits):
            total += (v.length + 7) // 8
        else:
            total += 1
    return total


@dataclass(frozen=True)
class Builtin:
    name: str
    arg_types: tuple  # of 'num' | 'bool' | 'str' | 'any'
    ret_type: str
    impl: Callable
    time_cost: Callable  # (args, result) -> int
    space_cost: Callable  # (args, result) -> int, working bits beyond args
    memo: bool = False


BUILTINS: dict[str, Builtin] = {}
_memo: dict = {}
_lock = threading.Lock()


def register(b: Builtin) -> Builtin:
    BUILTINS[b.name] = b
    return b


def call_builtin(name: str, args: tuple):
    b = BUILTINS[name]
    if not b.memo:
        return b.impl(*args)
    key = (name, args)
    hit = _memo.get(key)
    if hit is None:
        hit = b.impl(*args)
        with _lock:
            _memo[key] = hit
    return hit


def _const(c):
    return lambda args, res: c


register(Builtin("Len", ("str",), "num", lambda s: s.length,
                 lambda a, r: byte_cost(*a), _const(0)))
register(Builtin("Min", ("num", "num"), "num", min, _const(1), _const(0)))
register(Builtin("Max", ("num", "num"), "num", max, _const(1), _const(0)))
