"""Share verification via polynomial-coefficient commitments.

The dealer publishes C_j = g^(a_j) in an order-p subgroup mod q, one per
polynomial coefficient. Any holder can then check its share (i, v) against
g^v = prod(C_j ^ (i^j)) without learning the other coefficients. The
commitments detect corrupted shares; the secret stays computationally
hidden, which is acceptable because commitments never leave the institution
quorum.
"""

from __future__ import annotations

from dataclasses import dataclass

from .fields import FieldParams
from .shamir import Share


@dataclass(frozen=True)
class ShareCommitment:
    """g^(a_0) .. g^(a_{k-1}) mod q; length equals the threshold k."""

    coefficient_commitments: tuple[int, ...]

    @property
    def threshold(self) -> int:
        return len(self.coefficient_commitments)

    def to_wire(self) -> dict:
        return {"c": [str(c) for c in self.coefficient_commitments]}

    @classmethod
    def from_wire(cls, d: dict) -> ShareCommitment:
        return cls(tuple(int(c) for c in d["c"]))


def commit_coefficients(params: FieldParams, coefficients: list[int]) -> ShareCommitment:
    """Commit to the dealer's polynomial, lowest coefficient first."""
    group = params.require_group()
    return ShareCommitment(tuple(pow(group.g, a, group.q) for a in coefficients))


def verify_share(params: FieldParams, commitment: ShareCommitment, s: Share) -> bool:
    """Accept share (i, v) iff g^v matches the committed polynomial at i."""
    group = params.require_group()
    lhs = pow(group.g, s.value, group.q)
    rhs = 1
    for j, c in enumerate(commitment.coefficient_commitments):
        # exponents live mod p because the subgroup has order p
        rhs = rhs * pow(c, pow(s.index, j, params.p), group.q) % group.q
    return lhs == rhs
