"""Search amplifier constants for the sparse transformation and print the certificate."""
from __future__ import annotations

import sys

from sparseca.amplifier import asymptotic_advisory, build_amplifier
from sparseca.transforms import SPARSE


def main(horizon: int = 4) -> None:
    spec = build_amplifier(SPARSE, horizon)
    print(f"constants c1..c4 = {spec.constants}")
    print(spec.certificate_table(), end="")
    print(asymptotic_advisory(spec))


if __name__ == "__main__":
    main(*(int(a) for a in sys.argv[1:2]))
