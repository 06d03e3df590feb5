"""Self-referential program families, constant search and level bookkeeping."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from math import prod
from typing import Callable

from .errors import ParameterError, SearchError
from .interp import CostProfile, measure_costs
from .lang.program import RuleProgram, encode_bits, inc_level, parse, validate
from .transforms import SPARSE, TRANSFORM_BUILTINS, Transformation
from .universal import TEMPLATE

GRID_C1 = tuple(1 << k for k in range(21))
GRID_C3 = GRID_C1
GRID_EXP = tuple(range(1, 9))
DEFAULT_HORIZON = 8

_FIELDS = """\
bool field Live
num field Addr <= CSize - 1
num field Age <= WPeriod - 1
bool field Simu
enum field Work in {Idle, Sweep, Park}
bool field Prog
bool field LMail
bool field RMail
bool field Out
bool field LBor
bool field RBor
bool field Doom
"""


def _poly(c: int, e: int) -> str:
    return " * ".join([str(c)] + ["(Level + 1)"] * e)


def amplifier_text(n: int, constants: tuple, builtin: str) -> str:
    c1, c2, c3, c4 = constants
    head = (f"num param Level = {n}\n"
            f"num param CSize = {_poly(c1, c2)}\n"
            f"num param WPeriod = {_poly(c3, c4)}\n"
            f"string param SimProg = {builtin}(Level + 1, IncLevel(This))\n\n")
    return head + _FIELDS + "\n" + TEMPLATE


def dims(constants: tuple, n: int) -> tuple[int, int]:
    c1, c2, c3, c4 = constants
    return c1 * (n + 1) ** c2, c3 * (n + 1) ** c4


def builtin_for(G: Transformation) -> str:
    try:
        return TRANSFORM_BUILTINS[G.name]
    except KeyError:
        raise ParameterError(f"transformation {G.name!r} has no DSL builtin") from None


@dataclass
class CertificateRow:
    n: int
    Q: int
    U: int
    space: int
    time: int
    q_bits: int
    K: int

    @property
    def slack_q(self) -> int:
        return self.Q - max(self.space, self.q_bits, self.K)

    @property
    def slack_u(self) -> int:
        return self.U - 6 * self.Q - self.time

    def line(self) -> str:
        return (f"{self.n} {self.Q} {self.U} {self.space} {self.time} {self.q_bits} "
                f"{self.slack_q} {self.slack_u}")


class _ProfileCache:
    """Thread-safe memo of cost profiles keyed by program text."""

    def __init__(self, mode: str = "bound"):
        self.mode = mode
        self._d: dict[str, CostProfile] = {}
        self._lock = threading.Lock()

    def get(self, q: RuleProgram) -> CostProfile:
        key = q.text
        with self._lock:
            hit = self._d.get(key)
        if hit is None:
            hit = measure_costs(q, self.mode)
            with self._lock:
                self._d[key] = hit
        return hit


_CACHE = _ProfileCache()


def program_at(G: Transformation, constants: tuple, n: int) -> RuleProgram:
    return parse(amplifier_text(n, constants, builtin_for(G)), name=f"p{n}")


def simulated_at(G: Transformation, constants: tuple, n: int) -> RuleProgram:
    """q_n = G(n+1, p_{n+1})."""
    return G(n + 1, program_at(G, constants, n + 1))


def certificate_row(G: Transformation, constants: tuple, n: int,
                    cache: _ProfileCache | None = None) -> CertificateRow:
    cache = cache or _CACHE
    q = simulated_at(G, constants, n)
    prof = cache.get(q)
    Q, U = dims(constants, n)
    return CertificateRow(n, Q, U, prof.space_bits, prof.time_steps, encode_bits(q).length, q.K)


def _feasible(G, constants, horizon, cache) -> tuple[bool, str]:
    for n in range(horizon + 1):
        row = certificate_row(G, constants, n, cache)
        if row.slack_q < 0:
            return False, f"level {n}: Q={row.Q} < max(space, |q|, K) by {-row.slack_q}"
        if row.slack_u < 0:
            return False, f"level {n}: U={row.U} < 6Q + time by {-row.slack_u}"
    return True, ""


def find_constants(G: Transformation, horizon: int = DEFAULT_HORIZON,
                   cache: _ProfileCache | None = None) -> tuple:
    """Lexicographically smallest (c1, c2, c3, c4) on the grid passing every level.

    Costs depend on the constants only through literal digits and field
    widths, both monotone in the constants, so the texts built with
    (c3, c4) = (1, 1) give lower bounds used to prune (c1, c2).
    """
    cache = cache or _CACHE
    last = "grid empty"
    for c1 in GRID_C1:
        for c2 in GRID_EXP:
            ok_q = True
            fail_n = -1
            for n in range(horizon + 1):
                row = certificate_row(G, (c1, c2, 1, 1), n, cache)
                if row.Q < max(row.q_bits, row.K):
                    ok_q, fail_n = False, n
                    last = f"c1={c1} c2={c2}: level {n} needs Q >= {max(row.q_bits, row.K)}"
                    break
            if fail_n == 0:
                break  # Q_0 = c1 whatever c2 is
            if not ok_q:
                continue
            for c3 in GRID_C3:
                for c4 in GRID_EXP:
                    cs = (c1, c2, c3, c4)
                    if any(dims(cs, n)[1] < 6 * dims(cs, n)[0] for n in range(horizon + 1)):
                        continue
                    ok, why = _feasible(G, cs, horizon, cache)
                    if ok:
                        return cs
                    last = f"{cs}: {why}"
    raise SearchError(f"constant grid exhausted; binding inequality {last}")


@dataclass
class AmplifierSpec:
    G: Transformation
    constants: tuple
    horizon: int
    programs: dict = field(default_factory=dict)
    certificate: list = field(default_factory=list)

    def program(self, n: int) -> RuleProgram:
        p = self.programs.get(n)
        if p is None:
            p = self.programs[n] = program_at(self.G, self.constants, n)
        return p

    def dims_at(self, n: int) -> tuple[int, int]:
        return dims(self.constants, n)

    def certificate_table(self) -> str:
        head = "# n Q_n U_n space time |q_n| slackQ slackU"
        return "\n".join([head] + [r.line() for r in self.certificate]) + "\n"


def programs_at(spec: AmplifierSpec, n: int) -> RuleProgram:
    return spec.program(n)


def check_level(spec: AmplifierSpec, n: int) -> list[str]:
    """Invariant checks for one level; returns a list of problems."""
    problems = []
    p = spec.program(n)
    errs = validate(p)
    if errs:
        problems.append(f"p_{n} invalid: {errs[0]}")
        return problems
    want = encode_bits(spec.G(n + 1, inc_level(p)))
    if p.param("SimProg") != want:
        problems.append(f"SimProg(p_{n}) differs from G({n + 1}, inc_level(p_{n}))")
    if parse(p.text).ast != p.ast:
        problems.append(f"parse(print(p_{n})) differs from p_{n}")
    if inc_level(p).text != spec.program(n + 1).text:
        problems.append(f"inc_level(p_{n}) differs from p_{n + 1}")
    return problems


def build_amplifier(G: Transformation = SPARSE, horizon: int = DEFAULT_HORIZON,
                    constants: tuple | None = None) -> AmplifierSpec:
    builtin_for(G)
    if constants is None:
        constants = find_constants(G, horizon)
    spec = AmplifierSpec(G, tuple(constants), horizon)
    for n in range(horizon + 1):
        row = certificate_row(G, spec.constants, n)
        if row.slack_q < 0 or row.slack_u < 0:
            raise SearchError(f"constants {spec.constants} fail at level {n}: {row.line()}")
        spec.certificate.append(row)
        problems = check_level(spec, n)
        if problems:
            raise SearchError("; ".join(problems))
    return spec


def recheck_certificate(spec: AmplifierSpec) -> list[str]:
    """Re-measure every level with a fresh cache and compare."""
    fresh = _ProfileCache()
    out = []
    for row in spec.certificate:
        again = certificate_row(spec.G, spec.constants, row.n, fresh)
        if again.line() != row.line():
            out.append(f"level {row.n}: {row.line()} != {again.line()}")
    return out


def asymptotic_advisory(spec: AmplifierSpec) -> str:
    c1, c2, c3, c4 = spec.constants
    return (f"beyond level {spec.horizon} the inequalities are not verified; |q_n| grows like "
            f"log n while Q_n = {c1}(n+1)^{c2} and U_n = {c3}(n+1)^{c4} grow polynomially")


# ---------------------------------------------------------- chain bookkeeping

@dataclass
class SparseChainBook:
    N: Callable[[int], bool]
    Q: list
    U: list
    M: list = field(default_factory=list)
    Qp: list = field(default_factory=list)
    Up: list = field(default_factory=list)
    B: list = field(default_factory=list)
    W: list = field(default_factory=list)

    def __post_init__(self):
        self.M = [2 * n + 1 if self.N(n) else 1 for n in range(len(self.Q))]
        self.Qp = [q * m for q, m in zip(self.Q, self.M)]
        self.Up = [u * m for u, m in zip(self.U, self.M)]
        self.B = [prod(self.Qp[:n]) for n in range(len(self.Q) + 1)]
        self.W = [prod(self.Up[:n]) for n in range(len(self.Q) + 1)]

    def rows(self) -> list[str]:
        out = ["# n M_n Q'_n U'_n B_n W_n"]
        for n in range(len(self.Q)):
            out.append(f"{n} {self.M[n]} {self.Qp[n]} {self.Up[n]} {self.B[n]} {self.W[n]}")
        return out


def sparse_chain(N: Callable[[int], bool], horizon: int, constants: tuple | None = None,
                 Q: list | None = None, U: list | None = None) -> SparseChainBook:
    """Book-keeping for the sparse amplifier with effective set N.

    Dimensions come from the constants, or explicit per-level lists (used
    for small synthetic chains whose descriptors can be audited).
    """
    if Q is None or U is None:
        if constants is None:
            raise ParameterError("sparse_chain needs constants or explicit dimensions")
        Q = [dims(constants, n)[0] for n in range(horizon + 1)]
        U = [dims(constants, n)[1] for n in range(horizon + 1)]
    if len(Q) != len(U):
        raise ParameterError("Q and U lists differ in length")
    return SparseChainBook(N, list(Q), list(U))


def chain_descriptors(levels: list) -> list:
    """S_n for n = 1..len(levels): n-fold compositions of the given S'_i.

    ``levels[i]`` is the descriptor S'_i (for example compose_sim(S^u_i, S^s_i)
    or a plain sparse descriptor in synthetic chains).
    """
    from .sim import compose_sim
    out = []
    acc = None
    for d in levels:
        acc = d if acc is None else compose_sim(acc, d)
        out.append(acc)
    return out
