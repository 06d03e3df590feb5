"""Shared record of acceptance outcomes, printed in the terminal summary."""
from __future__ import annotations

RESULTS: dict = {}


def record(key: str, ok: bool, detail: str) -> None:
    RESULTS[key] = (bool(ok), detail)
    print(f"{'PASS' if ok else 'FAIL'} {key}: {detail}")
