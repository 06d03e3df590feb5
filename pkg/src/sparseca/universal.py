"""The universal simulator automaton: program emission, dimensions, analysis.

The emitted program follows the colony construction: cells carry Live,
Addr, Age, a simulation bit, mail bits and border/doom flags.  The agent's
computation is performed by an oracle latch attached to the compiled rule
as a row hook: one step before the end of the work period, every surviving
consistent colony cell receives its output bit and the doom flag.  The Work
field only records a sweeping head marker.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PERIODIC, LocalRule, TrajectoryBlock, run
from .errors import ParameterError, PreconditionError, QuiescenceError
from .interp import CostProfile, compile_program, measure_costs, rule_of
from .lang.printer import escape
from .lang.program import RuleProgram, parse, validate
from .lang.values import Bits
from .sim import SimulationDescriptor, window

UNIVERSAL_FIELDS = ("Live", "Addr", "Age", "Simu", "Work", "Prog", "LMail", "RMail", "Out",
                    "LBor", "RBor", "Doom")

_DECLS = """\
num param CSize = {Q}
num param WPeriod = {U}
string param SimProg = {prog}

bool field Live
num field Addr <= CSize - 1
num field Age <= WPeriod - 1
bool field Simu
enum field Work in {{Idle, Sweep, Park}}
bool field Prog
bool field LMail
bool field RMail
bool field Out
bool field LBor
bool field RBor
bool field Doom
"""

TEMPLATE = """\
proc Die()
  Live <- false
  Addr, Age <- 0
  Simu, Prog, LMail, RMail, Out <- false
  Work <- Idle
  LBor, RBor, Doom <- false
end

proc Valid()
  if Live- = LBor and not (LBor and RBor- and (Age = CSize or 2 * Age = CSize))
    return false
  elsif Live+ = RBor and not (RBor and LBor+ and (Age = CSize or 2 * Age = CSize))
    return false
  elsif LBor+ and not (RBor and (Age = CSize or 2 * Age = CSize))
    return false
  elsif RBor- and not (LBor and (Age = CSize or 2 * Age = CSize))
    return false
  elsif Live- and (Addr- + 1 mod CSize != Addr or Age- != Age)
    return false
  elsif Live+ and (Addr != Addr+ - 1 mod CSize or Age != Age+)
    return false
  elsif LBor and Age >= CSize and Addr != 0
    return false
  elsif RBor and Age >= CSize and Addr != CSize - 1
    return false
  end
  return true
end

proc Compute()
  if Work = Sweep
    if Addr = CSize - 1
      Work <- Park
    else
      Work <- Idle
    end
  elsif Work- = Sweep and Addr != 0
    Work <- Sweep
  elsif Work = Park and Age = WPeriod - 2
    Work <- Idle
  end
end

proc Birth()
  Die()
  if LBor+ and Age+ = CSize - Addr+ mod CSize
    Live <- true
    Addr <- Addr+ - 1 mod CSize
    Age <- Age+ + 1
    RMail <- RMail+
    LBor <- true
  elsif RBor- and Age- = Addr- + 1 mod CSize
    Live <- true
    Addr <- Addr- + 1 mod CSize
    Age <- Age- + 1
    LMail <- LMail-
    RBor <- true
  end
end

if Live
  if not Valid()
    Die()
  else
    if Age < CSize
      LBor, RBor <- false
      LMail <- LMail-
      RMail <- RMail+
    end
    if Age = CSize
      Doom <- false
      if LBor and Live-
        LBor <- false
      elsif RBor and Live+
        RBor <- false
      end
      if Addr = 0
        Work <- Sweep
      else
        Work <- Idle
      end
      Prog <- SimProg[Addr]
    end
    if CSize < Age < WPeriod - 1
      Compute()
    end
    if Age = WPeriod - 1
      if Addr = 0 and Doom-
        LBor <- true
      elsif Addr = CSize - 1 and Doom+
        RBor <- true
      end
      if Doom
        Die()
      else
        Simu, RMail, LMail <- Out
      end
    end
    if Live
      Age <- Age + 1 mod WPeriod
    end
  end
else
  Birth()
end
"""


@dataclass(frozen=True)
class UniversalParams:
    Q: int
    U: int
    target: RuleProgram

    def check(self, profile: CostProfile | None = None) -> None:
        K = self.target.K
        if self.Q % 4:
            raise ParameterError(f"colony size {self.Q} is not divisible by 4")
        if self.Q < max(K, 4):
            raise ParameterError(f"colony size {self.Q} cannot hold a {K}-bit state")
        if profile is not None:
            if self.Q < profile.space_bits:
                raise ParameterError(f"Q={self.Q} below measured space {profile.space_bits}")
            if self.U < 6 * self.Q + profile.time_steps:
                raise ParameterError(f"U={self.U} below 6Q + time = "
                                     f"{6 * self.Q + profile.time_steps}")
        elif self.U < 6 * self.Q:
            raise ParameterError(f"U={self.U} below 6Q")
        if compile_program(self.target)(0, 0, 0) != 0:
            raise QuiescenceError("target program does not map the blank triple to blank")


def target_profile(p: RuleProgram) -> CostProfile:
    """Exhaustive costs when the triple space is small, otherwise the static bound."""
    try:
        return measure_costs(p, "exhaustive")
    except Exception:  # noqa: BLE001 - capacity: fall back to the bound
        return measure_costs(p, "bound")


def min_dimensions(p: RuleProgram, profile: CostProfile, storage: bool = True) -> tuple[int, int]:
    """Smallest (Q, U): Q covers space, program bits and state bits; U = 6Q + time.

    With ``storage=False`` the program-bit requirement is dropped (the
    oracle agent never reads the Prog track).
    """
    need = max(profile.space_bits, p.K, 4)
    if storage:
        need = max(need, len(p.text.encode("utf-8")) * 8)
    Q = 4 * -(-need // 4)
    return Q, 6 * Q + profile.time_steps


def program_text(Q: int, U: int, prog_text: str) -> str:
    return _DECLS.format(Q=Q, U=U, prog=f'"{escape(prog_text)}"') + "\n" + TEMPLATE


def universal_program(params: UniversalParams, profile: CostProfile | None = None) -> RuleProgram:
    params.check(profile)
    prog = parse(program_text(params.Q, params.U, params.target.text), name="universal")
    errs = validate(prog)
    if errs:
        raise errs[0]
    return prog


# ------------------------------------------------------------------ latch

def make_latch(layout, target: RuleProgram, Q: int, U: int):
    """Row hook computing Out and Doom for colonies finishing their period."""
    fn = compile_program(target)
    K = target.K
    memo: dict = {}

    def f(a, b, c):
        key = (a, b, c)
        r = memo.get(key)
        if r is None:
            r = memo[key] = fn(a, b, c)
        return r

    sh = {n: np.uint64(layout.shift(n)) for n in ("Out", "Doom")}
    clear = np.uint64(~((1 << layout.shift("Out")) | (1 << layout.shift("Doom"))) & ((1 << 64) - 1))

    def hook_row(x, y, boundary):
        live = layout.get(x, "Live") == 1
        age = layout.get(x, "Age")
        addr = layout.get(x, "Addr")
        cand = live & (age == U - 2) & (layout.get(y, "Live") == 1) & (layout.get(y, "Age") == U - 1)
        idx = np.nonzero(cand)[0]
        if idx.size == 0:
            return y
        W = x.shape[0]
        start = idx - addr[idx]
        cols = start[:, None] + np.arange(K)[None, :]
        inside = np.ones(cols.shape, dtype=bool)
        if boundary == PERIODIC:
            cols = cols % W
        else:
            inside = (cols >= 0) & (cols < W)
            cols = np.clip(cols, 0, W - 1)
        ok = inside & live[cols] & (addr[cols] == np.arange(K)[None, :]) & (age[cols] == U - 2)
        weights = (1 << np.arange(K - 1, -1, -1)).astype(np.int64)

        def word(name):
            bits = (layout.get(x, name)[cols] & ok).astype(np.int64)
            return (bits * weights[None, :]).sum(axis=1)

        lw, sw, rw = word("LMail"), word("Simu"), word("RMail")
        res = np.array([f(int(a), int(b), int(c)) for a, b, c in zip(lw, sw, rw)], dtype=np.int64)
        a_i = addr[idx]
        out_bit = np.where(a_i < K, (res >> np.clip(K - 1 - a_i, 0, 63)) & 1, 0).astype(np.uint64)
        doom = (res == 0).astype(np.uint64)
        y = y.copy()
        y[idx] = (y[idx] & clear) | (out_bit << sh["Out"]) | (doom << sh["Doom"])
        return y

    def hook(x, y, boundary):
        if x.ndim == 1:
            return hook_row(x, y, boundary)
        flat_x = x.reshape(-1, x.shape[-1])
        flat_y = y.reshape(-1, y.shape[-1]).copy()
        for k in range(flat_x.shape[0]):
            flat_y[k] = hook_row(flat_x[k], flat_y[k], boundary)
        return flat_y.reshape(y.shape)

    return hook


def universal_oracle(layout, Q: int, U: int):
    """Analytic demanding predicate of the universal rule on well-formed states.

    Cells born from a creative neighbor (age in [1, Q] with one border flag)
    demand that neighbor.  Every other live output comes from a live valid
    center; a cleared border flag outside the retrieval ages also demands
    the neighbor on that side.
    """
    def oracle(states, delta: int):
        s = np.asarray(states).astype(np.uint64)
        nonblank = s != 0
        live = layout.get(s, "Live") == 1
        age = layout.get(s, "Age")
        addr = layout.get(s, "Addr")
        work = layout.get(s, "Work")
        lb = layout.get(s, "LBor") == 1
        rb = layout.get(s, "RBor") == 1
        young = (age >= 1) & (age <= Q)
        well = live & (age < U) & (addr < Q) & (work <= 2) & ~(young & lb & rb)
        born_left = young & lb & ~rb
        born_right = young & rb & ~lb
        center = ~born_left & ~born_right
        if delta == 0:
            dem = center
        elif delta == -1:
            dem = born_right | (center & ~lb & ~young)
        else:
            dem = born_left | (center & ~rb & ~young)
        return nonblank & (dem | ~well)
    return oracle


def universal_rule(prog: RuleProgram, target: RuleProgram) -> LocalRule:
    Q, U = int(prog.param("CSize")), int(prog.param("WPeriod"))
    r = rule_of(prog, name="universal")
    r.hook = make_latch(prog.layout, target, Q, U)
    r.demanding_oracle = universal_oracle(prog.layout, Q, U)
    return r


# ------------------------------------------------------------ descriptor

@dataclass
class UniversalSimulation(SimulationDescriptor):
    target: RuleProgram = None
    program: RuleProgram = None

    def _row_ok(self, rows: np.ndarray) -> np.ndarray:
        lay = self.host_layout
        return (lay.get(rows, "Live") == 1) & (lay.get(rows, "Age") == self.U - 2 * self.Q)

    def candidates(self, rows, boundary):
        lay = self.host_layout
        T, W = rows.shape
        b = self.base[1]
        ok = self._row_ok(rows) & (lay.get(rows, "Addr") == 0)
        out = np.zeros((T, W), dtype=bool)
        if T - b > 0:
            out[:T - b] = ok[b:]
        out[max(0, T - self.U + 1):] = False
        return out

    def mask(self, rows, boundary):
        cand = self.candidates(rows, boundary)
        out = np.zeros_like(cand)
        b = self.base[1]
        lay = self.host_layout
        for t, i in zip(*np.nonzero(cand)):
            seg = window(rows, int(i), int(t) + b, self.Q, 1, boundary)[0]
            out[t, i] = bool(np.all((lay.get(seg, "Live") == 1) & (lay.get(seg, "Age") == b)
                                    & (lay.get(seg, "Addr") == np.arange(self.Q))))
        return out

    def in_c(self, pattern):
        lay = self.host_layout
        row = pattern[self.base[1]]
        return bool(np.all((lay.get(row, "Live") == 1) & (lay.get(row, "Age") == self.base[1])
                           & (lay.get(row, "Addr") == np.arange(self.Q))))

    def state(self, pattern):
        if not self.in_c(pattern):
            return 0
        return self._word(pattern[self.base[1]])

    def _word(self, row) -> int:
        K = self.target.K
        bits = self.host_layout.get(row[:K], "Simu")
        v = 0
        for bit in bits:
            v = (v << 1) | int(bit)
        return v

    def values(self, rows, boundary, origins):
        b = self.base[1]
        return [self._word(window(rows, i, t + b, self.Q, 1, boundary)[0]) for i, t in origins]

    def encode_cells(self, cells):
        cells = np.asarray(cells).astype(np.uint64)
        lay = self.host_layout
        K, Q = self.target.K, self.Q
        out = np.zeros(cells.size * Q, dtype=np.uint64)
        for k, c in enumerate(cells):
            for j in range(Q):
                bit = (int(c) >> (K - 1 - j)) & 1 if j < K else 0
                out[k * Q + j] = lay.pack(Live=1, Addr=j, Age=0, Simu=bit, LMail=bit, RMail=bit)
        return out


def universal_descriptor(params: UniversalParams, prog: RuleProgram | None = None):
    prog = prog or universal_program(params)
    return UniversalSimulation(params.Q, params.U, (0, params.U - 2 * params.Q), prog.layout,
                               params.target.layout, "universal", target=params.target,
                               program=prog)


# -------------------------------------------------------------- analysis

def co_creative(layout, states, Q: int):
    age = layout.get(states, "Age")
    live = layout.get(states, "Live") == 1
    young = live & (age >= 1) & (age <= Q)
    return young & (layout.get(states, "LBor") == 1), young & (layout.get(states, "RBor") == 1)


def classify_macrocell(d: UniversalSimulation, block: TrajectoryBlock, anchor) -> int:
    """Creation case of a macro-cell: 1 undisturbed, 2 created from the left,
    3 created from the right, 4 from both sides; 0 if it has no co-creative
    cells but simulates blank (only possible in the first period).
    """
    i, t = anchor
    rows = np.asarray(block.rows)
    if t + d.U > rows.shape[0]:
        raise PreconditionError("block does not cover the macro-cell")
    P = window(rows, i, t, d.Q, d.U, block.boundary)
    if not d.in_c(P):
        raise PreconditionError(f"anchor {anchor} is not a macro-cell")
    left_cc, right_cc = co_creative(d.host_layout, P[:d.Q + 1], d.Q)
    from_left = bool(right_cc.any())  # built by a right-creative staircase
    from_right = bool(left_cc.any())
    if from_left and from_right:
        return 4
    if from_left:
        return 2
    if from_right:
        return 3
    return 1 if d.state(P) != 0 else 0


def staircase_ok(d: UniversalSimulation, block: TrajectoryBlock, anchor) -> bool:
    """Co-creative cells obey Age = Q - Addr (left) or Age = Addr + 1 (right)."""
    i, t = anchor
    P = window(np.asarray(block.rows), i, t, d.Q, d.U, block.boundary)
    lay = d.host_layout
    left_cc, right_cc = co_creative(lay, P[:d.Q + 1], d.Q)
    age, addr = lay.get(P[:d.Q + 1], "Age"), lay.get(P[:d.Q + 1], "Addr")
    return bool(np.all(age[left_cc] == d.Q - addr[left_cc])
                and np.all(age[right_cc] == addr[right_cc] + 1))


@dataclass
class Scenario:
    name: str
    params: UniversalParams
    program: RuleProgram
    rule: LocalRule
    descriptor: UniversalSimulation
    targets: np.ndarray
    block: TrajectoryBlock


def scenario(target: RuleProgram, cells, periods: int = 3, Q: int | None = None,
             U: int | None = None, name: str = "", mode: str = "det", blank_prob: float = 0.0,
             seed: int | None = None) -> Scenario:
    """Encode a target row into colonies and run it for whole work periods."""
    if Q is None or U is None:
        Q, U = min_dimensions(target, target_profile(target))
    params = UniversalParams(Q, U, target)
    prog = universal_program(params)
    rule = universal_rule(prog, target)
    d = universal_descriptor(params, prog)
    cells = np.asarray(cells, dtype=np.uint64)
    init = d.encode_cells(cells)
    blk = run(rule, init, periods * U - 1, boundary=PERIODIC, mode=mode, blank_prob=blank_prob,
              seed=seed, layout_name="universal")
    return Scenario(name or target.name, params, prog, rule, d, cells, blk)
