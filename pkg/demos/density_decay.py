"""Live fraction on base columns of sparsified XOR falls as the level grows."""
from __future__ import annotations

import numpy as np

from sparseca.analysis import live_fraction
from sparseca.core import PERIODIC, run
from sparseca.interp import rule_of
from sparseca.programs import builtin_program
from sparseca.transforms import sparse_descriptor, sparsify_with_map


def main(cycles: int = 8) -> None:
    xor = builtin_program("xor")
    cells = np.random.default_rng(10).integers(0, 2, 8).astype(np.uint64)
    cells[0] = 1
    print("n,M,base_column_live_fraction,(2n+1)^-1")
    for n in (1, 2, 4, 8, 16, 32):
        host, mapping = sparsify_with_map(n, xor)
        d = sparse_descriptor(n, xor, host, mapping)
        blk = run(rule_of(host), d.encode_cells(cells), cycles * d.U - 1, boundary=PERIODIC)
        f = live_fraction(blk.rows, range(0, blk.W, d.Q), 0, cycles * d.U)
        print(f"{n},{d.Q},{f:.5f},{1 / d.Q:.5f}")


if __name__ == "__main__":
    main()
