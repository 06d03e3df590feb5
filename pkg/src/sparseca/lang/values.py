"""Runtime values of the rule language that are not plain ints/bools."""
from __future__ import annotations

from dataclasses import dataclass

from ..errors import DecodeError


@dataclass(frozen=True)
class Bits:
    """A bitstring stored MSB-first in an int."""
    value: int
    length: int

    def __len__(self) -> int:
        return self.length

    def bit(self, i: int) -> int:
        if i < 0 or i >= self.length:
            return 0
        return (self.value >> (self.length - 1 - i)) & 1

    def to_bytes(self) -> bytes:
        if self.length % 8:
            raise DecodeError(f"bitstring of length {self.length} is not byte aligned")
        return self.value.to_bytes(self.length // 8, "big")

    def to_text(self) -> str:
        try:
            return self.to_bytes().decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DecodeError(f"bits are not UTF-8: {exc}") from exc

    def to_str01(self) -> str:
        return format(self.value, f"0{self.length}b") if self.length else ""

    @classmethod
    def from_bytes(cls, b: bytes) -> "Bits":
        return cls(int.from_bytes(b, "big"), 8 * len(b))

    @classmethod
    def from_text(cls, s: str) -> "Bits":
        return cls.from_bytes(s.encode("utf-8"))

    @classmethod
    def from_str01(cls, s: str) -> "Bits":
        return cls(int(s, 2) if s else 0, len(s))


def size_bits(v) -> int:
    """Storage size of a runtime value in bits (used by the cost meter)."""
    if isinstance(v, Bits):
        return v.length
    if isinstance(v, bool) or v is None:
        return 1
    if isinstance(v, int):
        return max(1, v.bit_length() + (1 if v < 0 else 0))
    raise TypeError(f"unexpected value {v!r}")
