"""Trajectory text files and PBM/PGM renders."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path

import numpy as np

from .core import FieldLayout, TrajectoryBlock
from .errors import DecodeError

BLANK_RUN_MIN = 4


def write_atomic(path, text: str) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _row_text(row, K: int) -> str:
    out = []
    run = 0
    for v in row:
        v = int(v)
        if v == 0:
            run += 1
            continue
        if run:
            out.extend([f"B*{run}"] if run >= BLANK_RUN_MIN else ["0" * K] * run)
            run = 0
        out.append(format(v, f"0{K}b"))
    if run:
        out.extend([f"B*{run}"] if run >= BLANK_RUN_MIN else ["0" * K] * run)
    return " ".join(out)


def trajectory_text(rows, K: int, layout: str = "") -> str:
    rows = np.asarray(rows)
    if rows.ndim != 2:
        raise ValueError("trajectory files hold a single (T, W) block")
    T, W = rows.shape
    lines = [f"K={K} W={W} T={T} layout={layout or '-'}"]
    lines += [_row_text(r, K) for r in rows]
    return "\n".join(lines) + "\n"


def write_trajectory(path, block: TrajectoryBlock, K: int) -> None:
    write_atomic(path, trajectory_text(block.rows, K, block.layout_name))


def parse_trajectory(text: str) -> tuple[np.ndarray, int, str]:
    """Returns (rows, K, layout name)."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DecodeError("empty trajectory file")
    try:
        head = dict(tok.split("=", 1) for tok in lines[0].split())
        K, W, T = int(head["K"]), int(head["W"]), int(head["T"])
    except (ValueError, KeyError) as exc:
        raise DecodeError(f"bad trajectory header {lines[0]!r}") from exc
    layout = head.get("layout", "-")
    if len(lines) - 1 != T:
        raise DecodeError(f"header says T={T} but file has {len(lines) - 1} rows")
    dtype = np.uint64 if K <= 64 else object
    rows = np.zeros((T, W), dtype=dtype)
    for t, ln in enumerate(lines[1:]):
        vals = []
        for tok in ln.split():
            if tok.startswith("B*"):
                vals.extend([0] * int(tok[2:]))
            elif len(tok) == K and set(tok) <= {"0", "1"}:
                vals.append(int(tok, 2))
            else:
                raise DecodeError(f"row {t}: bad cell token {tok!r}")
        if len(vals) != W:
            raise DecodeError(f"row {t}: {len(vals)} cells, expected {W}")
        rows[t] = vals
    return rows, K, "" if layout == "-" else layout


def read_trajectory(path) -> tuple[np.ndarray, int, str]:
    return parse_trajectory(Path(path).read_text(encoding="utf-8"))


def pbm_text(rows) -> str:
    """Plain PBM of liveness; time increases upward (row 0 at the bottom)."""
    rows = np.asarray(rows)
    T, W = rows.shape
    lines = ["P1", f"{W} {T}"]
    for r in rows[::-1]:
        lines.append(" ".join("1" if v != 0 else "0" for v in r))
    return "\n".join(lines) + "\n"


def pgm_text(rows, layout: FieldLayout, field: str) -> str:
    """Plain PGM of one field's value; time increases upward."""
    rows = np.asarray(rows)
    T, W = rows.shape
    vals = np.asarray(layout.get(rows.astype(np.uint64), field))
    maxval = max(1, layout.mask(field))
    lines = ["P2", f"{W} {T}", str(maxval)]
    for r in vals[::-1]:
        lines.append(" ".join(str(int(v)) for v in r))
    return "\n".join(lines) + "\n"


def read_pnm(text: str) -> tuple[str, np.ndarray]:
    toks = [t for ln in text.splitlines() if not ln.startswith("#") for t in ln.split()]
    magic = toks[0]
    W, T = int(toks[1]), int(toks[2])
    start = 3 if magic == "P1" else 4
    vals = np.array([int(t) for t in toks[start:start + W * T]], dtype=np.int64)
    return magic, vals.reshape(T, W)[::-1]
