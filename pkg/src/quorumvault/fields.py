"""Prime-field arithmetic: the ground layer for shares and secure computation.

Field elements are plain Python ints in [0, p); a Field instance carries the
modulus and performs exact modular arithmetic (Python ints never overflow).
The default modulus is the Mersenne prime 2^61 - 1, comfortably above the
7-byte limbs used to chunk keys and ciphertexts, while tiny primes (31, 5, 3)
are supported so exhaustive checks can enumerate entire distributions.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NoCommitmentGroup, ZeroInverse

DEFAULT_PRIME = (1 << 61) - 1

# q = 52*p + 1 for p = 2^61-1; g = 2^52 generates the order-p subgroup mod q.
DEFAULT_COMMITMENT_Q = 119903836479112085453
DEFAULT_COMMITMENT_G = 1 << 52

# Small instantiation used by exhaustive tests: 31 | 311 - 1, ord(7) = 31.
TEST_COMMITMENT_Q = 311
TEST_COMMITMENT_G = 7

_MR_BASES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37)


def is_prime(n: int) -> bool:
    """Deterministic Miller-Rabin, exact for n < 3.3e24 (covers 64-bit)."""
    if n < 2:
        return False
    for b in _MR_BASES:
        if n == b:
            return True
        if n % b == 0:
            return False
    d, s = n - 1, 0
    while d % 2 == 0:
        d //= 2
        s += 1
    for b in _MR_BASES:
        x = pow(b, d, n)
        if x in (1, n - 1):
            continue
        for _ in range(s - 1):
            x = x * x % n
            if x == n - 1:
                break
        else:
            return False
    return True


@dataclass(frozen=True)
class CommitmentGroup:
    """Order-p subgroup of Z_q* used for polynomial-coefficient commitments.

    Requires q prime, p | q - 1, and g a generator of the order-p subgroup
    (g != 1, g^p = 1 mod q).
    """

    q: int
    g: int

    def validate(self, p: int) -> None:
        if not is_prime(self.q):
            raise ValueError(f"q = {self.q} is not prime")
        if (self.q - 1) % p != 0:
            raise ValueError(f"p = {p} does not divide q - 1")
        if self.g in (0, 1) or pow(self.g, p, self.q) != 1:
            raise ValueError("g does not generate an order-p subgroup")


@dataclass(frozen=True)
class FieldParams:
    """Deployment-wide field choice, with an optional commitment group."""

    p: int = DEFAULT_PRIME
    commitment_group: CommitmentGroup | None = None

    def __post_init__(self) -> None:
        if not is_prime(self.p):
            raise ValueError(f"modulus {self.p} is not prime")
        if self.commitment_group is not None:
            self.commitment_group.validate(self.p)

    def field(self) -> Field:
        return Field(self.p)

    def require_group(self) -> CommitmentGroup:
        if self.commitment_group is None:
            raise NoCommitmentGroup("field params carry no commitment group")
        return self.commitment_group


def default_params(with_commitments: bool = False) -> FieldParams:
    group = CommitmentGroup(DEFAULT_COMMITMENT_Q, DEFAULT_COMMITMENT_G) if with_commitments else None
    return FieldParams(DEFAULT_PRIME, group)


def small_test_params() -> FieldParams:
    """p = 31 with the q = 311 commitment group; for exhaustive tests."""
    return FieldParams(31, CommitmentGroup(TEST_COMMITMENT_Q, TEST_COMMITMENT_G))


class Field:
    """Arithmetic in Z_p. All inputs are assumed reduced; outputs always are."""

    __slots__ = ("p",)

    def __init__(self, p: int):
        self.p = p

    def reduce(self, a: int) -> int:
        return a % self.p

    def add(self, a: int, b: int) -> int:
        s = a + b
        return s - self.p if s >= self.p else s

    def sub(self, a: int, b: int) -> int:
        d = a - b
        return d + self.p if d < 0 else d

    def mul(self, a: int, b: int) -> int:
        return a * b % self.p

    def neg(self, a: int) -> int:
        return self.p - a if a else 0

    def inv(self, a: int) -> int:
        """Inverse via Fermat: a^(p-2) mod p."""
        if a == 0:
            raise ZeroInverse("0 has no multiplicative inverse")
        return pow(a, self.p - 2, self.p)

    def div(self, a: int, b: int) -> int:
        return self.mul(a, self.inv(b))

    def pow(self, a: int, e: int) -> int:
        return pow(a, e, self.p)

    def poly_eval(self, coeffs: list[int], x: int) -> int:
        """Evaluate sum(coeffs[d] * x^d) by Horner; coeffs low degree first."""
        acc = 0
        for c in reversed(coeffs):
            acc = (acc * x + c) % self.p
        return acc

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Field) and other.p == self.p

    def __hash__(self) -> int:
        return hash(("Field", self.p))

    def __repr__(self) -> str:
        return f"Field({self.p})"
