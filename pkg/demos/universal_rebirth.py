"""Universal simulator of identity: a blank cell's colony dies and is rebuilt each period."""
from __future__ import annotations

from sparseca.core import PERIODIC
from sparseca.programs import builtin_program
from sparseca.sim import decode, find_macrocells
from sparseca.universal import classify_macrocell, scenario, staircase_ok

CASES = {0: "blank, no creation", 1: "undisturbed", 2: "built from the left",
         3: "built from the right", 4: "built from both sides"}


def main() -> None:
    sc = scenario(builtin_program("identity"), [1, 1, 0, 1, 1], periods=3, Q=8, U=50)
    d = sc.descriptor
    print(f"Q={d.Q} U={d.U} host K={sc.program.K}")
    print("decoded rows:")
    print(decode(d, sc.block.rows, PERIODIC))
    for a in find_macrocells(d, sc.block):
        if a[1] + d.U <= sc.block.T:
            c = classify_macrocell(d, sc.block, a)
            print(f"anchor {a}: case {c} ({CASES[c]}), staircase ok={staircase_ok(d, sc.block, a)}")


if __name__ == "__main__":
    main()
