"""Sparsify XOR at level n, run it, check the decoded rows and save a PBM picture."""
from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from sparseca.core import PERIODIC, run, xor_rule
from sparseca.fileio import pbm_text, write_atomic
from sparseca.interp import rule_of
from sparseca.programs import builtin_program
from sparseca.sim import decode
from sparseca.transforms import sparse_descriptor, sparsify_with_map


def main(n: int = 4, out_dir: str = "demos/out") -> None:
    xor = builtin_program("xor")
    host, mapping = sparsify_with_map(n, xor)
    d = sparse_descriptor(n, xor, host, mapping)
    cells = np.random.default_rng(1).integers(0, 2, 12).astype(np.uint64)
    steps = 6
    blk = run(rule_of(host), d.encode_cells(cells), steps * d.U - 1, boundary=PERIODIC)
    got = decode(d, blk.rows, PERIODIC)
    want = run(xor_rule(), cells, steps - 1, boundary=PERIODIC).rows
    print(f"host K={host.K} macro-cell {d.Q}x{d.U} decode matches: {np.array_equal(got, want)}")
    print(f"live fraction of host block: {np.mean(blk.rows != 0):.4f}")
    Path(out_dir).mkdir(parents=True, exist_ok=True)
    write_atomic(Path(out_dir) / f"sparse_xor_n{n}.pbm", pbm_text(blk.rows))


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:2]))
