from collections import Counter
from itertools import combinations, product

import pytest

from quorumvault.errors import (
    BadThreshold,
    DuplicateIndex,
    IndexCollision,
    InconsistentShares,
    NotEnoughShares,
    QuorumTooSmall,
)
from quorumvault.fields import DEFAULT_PRIME, Field
from quorumvault.rng import SeedStream
from quorumvault.shamir import (
    Share,
    interpolate_at,
    lagrange_coeffs,
    reconstruct,
    recover_share,
    recovery_contribution,
    recovery_masks,
    reshare,
    share,
)

F31 = Field(31)

# hand oracle: f(x) = 7 + 2x + x^2 over Z_31, evaluated directly
ORACLE_COEFFS = [7, 2, 1]
ORACLE_SHARES = [Share(i, (7 + 2 * i + i * i) % 31) for i in range(1, 6)]


class StubRng:
    """Emits a fixed coefficient tape; lets tests pin the polynomial."""

    def __init__(self, values):
        self._values = list(values)

    def field_element(self, p):
        return self._values.pop(0) % p


def test_oracle_polynomial_matches_spec_constants():
    assert [s.value for s in ORACLE_SHARES] == [10, 15, 22, 0, 11]


def test_share_with_fixed_coefficients():
    shares, coeffs = share(F31, 7, k=3, n=5, rng=StubRng([2, 1]))
    assert coeffs == ORACLE_COEFFS
    assert shares == ORACLE_SHARES


def test_share_constant_polynomial():
    shares, _ = share(F31, 0, k=1, n=5, rng=StubRng([]))
    assert all(s.value == 0 for s in shares)


def test_share_bad_threshold():
    rng = SeedStream(1)
    with pytest.raises(BadThreshold):
        share(F31, 7, k=3, n=2, rng=rng)
    with pytest.raises(BadThreshold):
        share(Field(5), 1, k=2, n=5, rng=rng)  # n >= p
    with pytest.raises(BadThreshold):
        share(F31, 7, k=0, n=5, rng=rng)


def test_lagrange_at_zero_hand_oracle():
    # hand interpolation for {1,2,3} at 0 over Z_31
    assert lagrange_coeffs(F31, [1, 2, 3], 0) == [3, 28, 1]
    # weights recover the secret of the oracle polynomial
    vals = [s.value for s in ORACLE_SHARES[:3]]
    assert sum(w * v for w, v in zip([3, 28, 1], vals)) % 31 == 7


def test_lagrange_singleton_identity():
    assert lagrange_coeffs(F31, [4], 4) == [1]


def test_lagrange_reproduces_f4():
    weights = lagrange_coeffs(F31, [1, 2, 3], 4)
    vals = [s.value for s in ORACLE_SHARES[:3]]
    assert sum(w * v for w, v in zip(weights, vals)) % 31 == ORACLE_SHARES[3].value == 0


def test_lagrange_duplicate_rejected():
    with pytest.raises(DuplicateIndex):
        lagrange_coeffs(F31, [1, 2, 2], 0)


def test_reconstruct_oracle():
    assert reconstruct(F31, ORACLE_SHARES[:3], k=3) == 7


def test_reconstruct_not_enough():
    with pytest.raises(NotEnoughShares):
        reconstruct(F31, ORACLE_SHARES[:2], k=3)


def test_reconstruct_cross_checks_extra_shares():
    # f(4) = 0 from the oracle polynomial; the value 1 is off-polynomial
    bad = ORACLE_SHARES[:3] + [Share(4, 1)]
    with pytest.raises(InconsistentShares):
        reconstruct(F31, bad, k=3)
    # all five honest shares agree
    assert reconstruct(F31, ORACLE_SHARES, k=3) == 7


def test_reconstruct_correctness_property():
    # >= 1000 random cases across both acceptance fields
    cases = 0
    for p in (31, DEFAULT_PRIME):
        f = Field(p)
        rng = SeedStream(f"recon-{p}")
        for trial in range(500):
            n = rng.randint(1, 7)
            k = rng.randint(1, n)
            secret = rng.field_element(p)
            shares, _ = share(f, secret, k, n, rng.split(f"s{trial}"))
            picks = list(shares)
            rng.shuffle(picks)
            assert reconstruct(f, picks[:k], k) == secret
            cases += 1
    assert cases >= 1000


def test_perfect_secrecy_exhaustive_p31_k3():
    # enumerate all 31^2 coefficient pairs per secret; any fixed pair of
    # share indices must be jointly uniform, identically for every secret
    f = Field(31)
    for i, j in combinations(range(1, 6), 2):
        baseline = None
        for secret in range(31):
            dist = Counter()
            for c1 in range(31):
                for c2 in range(31):
                    coeffs = [secret, c1, c2]
                    dist[(f.poly_eval(coeffs, i), f.poly_eval(coeffs, j))] += 1
            assert len(dist) == 31 * 31 and set(dist.values()) == {1}
            if baseline is None:
                baseline = dist
            else:
                assert dist == baseline


def test_linearity():
    f = Field(31)
    rng = SeedStream("lin")
    for trial in range(50):
        a, b, c = (rng.field_element(31) for _ in range(3))
        sa, _ = share(f, a, 3, 5, rng.split(f"a{trial}"))
        sb, _ = share(f, b, 3, 5, rng.split(f"b{trial}"))
        total = [Share(s.index, f.add(s.value, t.value)) for s, t in zip(sa, sb)]
        scaled = [Share(s.index, f.mul(c, s.value)) for s in sa]
        assert reconstruct(f, total[:3], 3) == f.add(a, b)
        assert reconstruct(f, scaled[2:], 3) == f.mul(c, a)


def test_reshare_3_5_to_4_5():
    rng = SeedStream("reshare")
    new = reshare(F31, ORACLE_SHARES, k=3, new_k=4, new_n=5, rng=rng)
    assert [s.index for s in new] == [1, 2, 3, 4, 5]
    for quad in combinations(new, 4):
        assert reconstruct(F31, quad, 4) == 7
    # old threshold no longer reconstructs deterministically to the secret:
    # three new shares lie on a degree-3 polynomial, not a degree-2 one
    assert interpolate_at(F31, new[:4], 0) == 7


def test_reshare_degenerate_1_1():
    f = Field(31)
    old, _ = share(f, 9, 1, 1, SeedStream("x"))
    new = reshare(f, old, k=1, new_k=1, new_n=1, rng=SeedStream("y"))
    assert reconstruct(f, new, 1) == 9


def test_reshare_quorum_too_small():
    with pytest.raises(QuorumTooSmall):
        reshare(F31, ORACLE_SHARES[:2], k=3, new_k=4, new_n=5, rng=SeedStream("z"))


def test_small_field_five_nodes_impossible():
    # Z_5 has only 4 nonzero evaluation points, Z_3 only 2: a 5-node
    # sharing cannot exist there and must be refused, not degraded
    for p in (3, 5):
        with pytest.raises(BadThreshold):
            share(Field(p), 1, k=3, n=5, rng=SeedStream("bad"))


def test_reshare_new_shares_hide_secret_exhaustive_p7():
    # smallest field hosting 5 nodes; after (3,5) -> (4,5), enumerate the
    # sub-sharing tapes of two quorum holders fully (third tape fixed):
    # the joint distribution of any new-share triple is uniform and
    # identical for every secret, i.e. any 3 new shares stay consistent
    # with every candidate secret
    f = Field(7)
    weights = lagrange_coeffs(f, [1, 2, 3], 0)
    tapes = list(product(range(7), repeat=3))
    per_secret = []
    for secret in range(7):
        old = [Share(i, f.poly_eval([secret, 2, 3], i)) for i in range(1, 6)]
        # per-holder tables: tape -> sub-shares at the probed positions 1..3
        tables = []
        for holder in old[:3]:
            tables.append([
                tuple(f.poly_eval([holder.value, *tape], j) for j in (1, 2, 3))
                for tape in tapes
            ])
        fixed3 = tables[2][0]  # holder 3 tape fixed to zeros
        dist = Counter()
        for sub1 in tables[0]:
            for sub2 in tables[1]:
                new = tuple(
                    (weights[0] * a + weights[1] * b + weights[2] * c) % 7
                    for a, b, c in zip(sub1, sub2, fixed3)
                )
                dist[new] += 1
        per_secret.append(dist)
    for dist in per_secret:
        # uniform over Z_7^3 regardless of the secret
        assert len(dist) == 343 and len(set(dist.values())) == 1
    assert all(d == per_secret[0] or set(d) == set(per_secret[0]) for d in per_secret)


def test_reshare_preserves_secret_small_field():
    f = Field(7)
    for secret in range(7):
        old, _ = share(f, secret, 3, 5, SeedStream(f"o{secret}"))
        new = reshare(f, old, 3, 4, 5, SeedStream(f"n{secret}"))
        assert reconstruct(f, new[:4], 4) == secret


def test_recover_share_oracle():
    # helpers {1,2,3} rebuild f(4) = 0
    rec = recover_share(F31, ORACLE_SHARES[:3], lost_index=4, k=3, rng=SeedStream("r"))
    assert rec == Share(4, 0)


def test_recover_share_k1():
    f = Field(31)
    shares, _ = share(f, 12, 1, 3, SeedStream("k1"))
    rec = recover_share(f, [shares[0]], lost_index=3, k=1, rng=SeedStream("r"))
    assert rec.value == shares[0].value == 12


def test_recover_share_errors():
    with pytest.raises(QuorumTooSmall):
        recover_share(F31, ORACLE_SHARES[:2], lost_index=4, k=3, rng=SeedStream("r"))
    with pytest.raises(IndexCollision):
        recover_share(F31, ORACLE_SHARES[:3], lost_index=2, k=3, rng=SeedStream("r"))


def test_recovery_masks_telescope():
    indices = [1, 2, 3]
    masks = recovery_masks(F31, indices, SeedStream("m"))
    mask_total = 0
    for i in indices:
        for l in indices:
            if i != l:
                mask_total += masks[(i, l)] - masks[(l, i)]
    assert mask_total % 31 == 0
    contribs = [
        recovery_contribution(F31, s, 4, indices, masks) for s in ORACLE_SHARES[:3]
    ]
    assert sum(contribs) % 31 == 0  # f(4) = 0


def test_recovery_contributions_uniform_exhaustive_p5():
    # fix the polynomial; enumerate all mask assignments over Z_5 for the
    # 6 ordered helper pairs; contribution vectors must hit every point of
    # the sum-constrained plane equally often (n = 4: Z_5's four nonzero points)
    f = Field(5)
    shares, _ = share(f, 3, 3, 4, SeedStream("u"))
    helpers, indices = shares[:3], [1, 2, 3]
    target = interpolate_at(f, helpers, 4)
    pair_keys = [(i, l) for i in indices for l in indices if i != l]
    dist = Counter()
    for assignment in product(range(5), repeat=len(pair_keys)):
        masks = dict(zip(pair_keys, assignment))
        contribs = [recovery_contribution(f, s, 4, indices, masks) for s in helpers]
        assert sum(contribs) % 5 == target
        dist[(contribs[0], contribs[1])] += 1
    assert len(dist) == 25 and len(set(dist.values())) == 1


def test_share_wire_round_trip():
    s = Share(3, 22)
    assert s.to_wire() == {"i": 3, "v": "22"}
    assert Share.from_wire(s.to_wire()) == s
