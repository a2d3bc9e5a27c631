"""Seedable, splittable randomness.

All protocol randomness is drawn through a SeedStream so a single scenario
seed pins an entire execution. Children are derived by hashing the parent
key with a label: sibling streams are independent and adding draws to one
component never shifts another component's tape.
"""

from __future__ import annotations

import hashlib
import random


class SeedStream:
    """Deterministic random stream with labelled splitting."""

    __slots__ = ("_key", "_rng")

    def __init__(self, seed: int | str | bytes, label: str = "root"):
        if isinstance(seed, int):
            seed = seed.to_bytes(16, "big", signed=False) if seed >= 0 else str(seed).encode()
        elif isinstance(seed, str):
            seed = seed.encode()
        self._key = hashlib.sha256(seed + b"/" + label.encode()).digest()
        self._rng = random.Random(int.from_bytes(self._key, "big"))

    def split(self, label: str) -> SeedStream:
        """Derive an independent child stream; same label, same child."""
        return SeedStream(self._key, label)

    def randrange(self, n: int) -> int:
        return self._rng.randrange(n)

    def randint(self, a: int, b: int) -> int:
        return self._rng.randint(a, b)

    def getrandbits(self, n: int) -> int:
        return self._rng.getrandbits(n)

    def bytes(self, n: int) -> bytes:
        return self._rng.getrandbits(n * 8).to_bytes(n, "big")

    def hex(self, n: int) -> str:
        return self.bytes(n).hex()

    def field_element(self, p: int) -> int:
        """Uniform element of Z_p."""
        return self._rng.randrange(p)

    def shuffle(self, xs: list) -> None:
        self._rng.shuffle(xs)


def system_stream(label: str = "root") -> SeedStream:
    """Stream seeded from the OS; for real deployments, not scenarios."""
    import os

    return SeedStream(os.urandom(32), label)
