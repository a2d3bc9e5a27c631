"""Threshold secret sharing over a prime field.

A secret s is the constant term of a random polynomial f of degree k-1;
holder i receives the evaluation f(i). Any k evaluations determine f (and
hence s) by Lagrange interpolation; any k-1 reveal nothing. On top of the
basic scheme this module implements threshold migration (resharing without
reconstruction) and masked single-share recovery, both built from the same
sub-share primitives the node protocol uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    BadThreshold,
    DuplicateIndex,
    IndexCollision,
    InconsistentShares,
    NotEnoughShares,
    QuorumTooSmall,
)
from .fields import Field
from .rng import SeedStream


@dataclass(frozen=True, order=True)
class Share:
    """One polynomial evaluation: (index, f(index)). Index is never 0."""

    index: int
    value: int

    def to_wire(self) -> dict:
        return {"i": self.index, "v": str(self.value)}

    @classmethod
    def from_wire(cls, d: dict) -> Share:
        return cls(int(d["i"]), int(d["v"]))


def share(field: Field, secret: int, k: int, n: int, rng: SeedStream) -> tuple[list[Share], list[int]]:
    """Split a secret into n shares with threshold k.

    Returns (shares, coefficients). The coefficient list [secret, c1, ...]
    exists only so callers can build verification commitments; discard it
    afterwards.
    """
    if not 1 <= k <= n:
        raise BadThreshold(f"need 1 <= k <= n, got k={k}, n={n}")
    if n >= field.p:
        raise BadThreshold(f"n={n} leaves no distinct nonzero indices mod {field.p}")
    coeffs = [secret % field.p] + [rng.field_element(field.p) for _ in range(k - 1)]
    return [Share(i, field.poly_eval(coeffs, i)) for i in range(1, n + 1)], coeffs


def lagrange_coeffs(field: Field, indices: Sequence[int], eval_point: int = 0) -> list[int]:
    """Interpolation weights: sum(w[i] * f(indices[i])) = f(eval_point).

    Exact for any polynomial of degree < len(indices).
    """
    if len(set(indices)) != len(indices):
        raise DuplicateIndex(f"indices not distinct: {sorted(indices)}")
    weights = []
    for i, xi in enumerate(indices):
        num, den = 1, 1
        for j, xj in enumerate(indices):
            if j == i:
                continue
            num = field.mul(num, field.sub(eval_point, xj))
            den = field.mul(den, field.sub(xi, xj))
        weights.append(field.div(num, den))
    return weights


def interpolate_at(field: Field, points: Sequence[Share], x: int) -> int:
    """Evaluate the unique degree < len(points) polynomial through points."""
    weights = lagrange_coeffs(field, [s.index for s in points], x)
    acc = 0
    for w, s in zip(weights, points):
        acc = field.add(acc, field.mul(w, s.value))
    return acc


def reconstruct(field: Field, shares: Iterable[Share], k: int) -> int:
    """Recover the secret from at least k shares.

    With more than k shares, every extra share must lie on the polynomial
    defined by the first k (equivalent to all size-k subsets agreeing);
    disagreement surfaces storage corruption instead of silently picking a
    subset.
    """
    ordered = sorted(shares)
    if len({s.index for s in ordered}) != len(ordered):
        raise DuplicateIndex("repeated share index")
    if len(ordered) < k:
        raise NotEnoughShares(f"got {len(ordered)} shares, need {k}")
    base, rest = ordered[:k], ordered[k:]
    for extra in rest:
        if interpolate_at(field, base, extra.index) != extra.value:
            raise InconsistentShares(f"share at index {extra.index} is off-polynomial")
    return interpolate_at(field, base, 0)


def select_quorum(shares: Iterable[Share], k: int) -> list[Share]:
    """Deterministic minimal quorum: the k lowest indices."""
    ordered = sorted(shares)
    if len(ordered) < k:
        raise QuorumTooSmall(f"got {len(ordered)} holders, need {k}")
    return ordered[:k]


def reshare_subshares(field: Field, holder: Share, new_k: int, new_n: int, rng: SeedStream) -> list[Share]:
    """One holder's step of resharing: split its own share under (new_k, new_n)."""
    subs, _ = share(field, holder.value, new_k, new_n, rng)
    return subs


def combine_subshares(field: Field, quorum_indices: Sequence[int], subs_for_j: dict[int, int]) -> int:
    """New holder j's step: weight quorum sub-shares by interpolation at 0."""
    weights = lagrange_coeffs(field, quorum_indices, 0)
    acc = 0
    for w, qi in zip(weights, quorum_indices):
        acc = field.add(acc, field.mul(w, subs_for_j[qi]))
    return acc


def reshare(field: Field, old_shares: Iterable[Share], k: int, new_k: int, new_n: int,
            rng: SeedStream) -> list[Share]:
    """Move a sharing from threshold k to (new_k, new_n) without reconstruction.

    A quorum of exactly k holders (ascending index) each sub-shares its
    share; new holder j combines the sub-shares it received with the
    quorum's interpolation weights. The result is a fresh (new_k, new_n)
    sharing of the same secret, statistically independent of the old shares
    given the secret.
    """
    quorum = select_quorum(old_shares, k)
    quorum_indices = [s.index for s in quorum]
    subs = {s.index: reshare_subshares(field, s, new_k, new_n, rng.split(f"reshare-{s.index}"))
            for s in quorum}
    new_shares = []
    for j in range(1, new_n + 1):
        subs_for_j = {qi: subs[qi][j - 1].value for qi in quorum_indices}
        new_shares.append(Share(j, combine_subshares(field, quorum_indices, subs_for_j)))
    return new_shares


def recovery_masks(field: Field, helper_indices: Sequence[int], rng: SeedStream) -> dict[tuple[int, int], int]:
    """Pairwise masks m[(i, l)] known to helpers i and l, i != l."""
    masks = {}
    for i in helper_indices:
        for l in helper_indices:
            if i != l:
                masks[(i, l)] = rng.split(f"mask-{i}-{l}").field_element(field.p)
    return masks


def recovery_contribution(field: Field, helper: Share, lost_index: int,
                          helper_indices: Sequence[int],
                          masks: dict[tuple[int, int], int]) -> int:
    """Helper i's masked summand: w_i(j)*s_i + sum(m[i,l] - m[l,i]).

    The mask terms telescope to zero across all helpers, so the recovering
    party learns exactly f(lost_index); each individual contribution is
    uniformly masked.
    """
    weights = lagrange_coeffs(field, helper_indices, lost_index)
    w = weights[list(helper_indices).index(helper.index)]
    acc = field.mul(w, helper.value)
    for l in helper_indices:
        if l != helper.index:
            acc = field.add(acc, field.sub(masks[(helper.index, l)], masks[(l, helper.index)]))
    return acc


def recover_share(field: Field, helpers: Iterable[Share], lost_index: int, k: int,
                  rng: SeedStream) -> Share:
    """Rebuild the share at lost_index from exactly k helpers.

    Helpers never reveal their own shares: only the masked contributions
    travel, and only their sum is meaningful.
    """
    quorum = select_quorum(helpers, k)
    indices = [s.index for s in quorum]
    if lost_index in indices:
        raise IndexCollision(f"index {lost_index} is among the helpers")
    masks = recovery_masks(field, indices, rng)
    total = 0
    for s in quorum:
        total = field.add(total, recovery_contribution(field, s, lost_index, indices, masks))
    return Share(lost_index, total)
