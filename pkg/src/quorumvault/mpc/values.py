"""Shared-value handles and bit encoding.

A SharedValue is metadata only: the shares themselves live in per-node
stores keyed by wire name, so the same handle describes the value at every
node and on the client.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from ..errors import WidthOverflow

MAX_WIDTH = 16


class ValueRepr(str, Enum):
    INT_ONLY = "int"
    BITS_ONLY = "bits"
    DUAL = "dual"


def check_width(width: int, p: int) -> None:
    if not 1 <= width <= MAX_WIDTH:
        raise WidthOverflow(f"width {width} outside 1..{MAX_WIDTH}")
    if (1 << width) >= p:
        raise WidthOverflow(f"2^{width} does not fit the field modulus {p}")


def bits_of(value: int, width: int) -> list[int]:
    """LSB-first binary expansion; rejects values that do not fit."""
    if not 0 <= value < (1 << width):
        raise WidthOverflow(f"{value} does not fit in {width} bits")
    return [(value >> i) & 1 for i in range(width)]


def int_of_bits(bits: list[int]) -> int:
    return sum(b << i for i, b in enumerate(bits))


@dataclass(frozen=True)
class SharedValue:
    """Handle to a secret-shared datum; shares are stored per node."""

    vid: str
    repr: ValueRepr
    width: int
    k: int
    int_wire: str | None = None
    bit_wires: tuple[str, ...] = ()
    policy_ref: str | None = None

    @property
    def has_int(self) -> bool:
        return self.repr in (ValueRepr.INT_ONLY, ValueRepr.DUAL)

    @property
    def has_bits(self) -> bool:
        return self.repr in (ValueRepr.BITS_ONLY, ValueRepr.DUAL)
