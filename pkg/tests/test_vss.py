import pytest

from quorumvault.errors import NoCommitmentGroup
from quorumvault.fields import FieldParams, default_params, small_test_params
from quorumvault.rng import SeedStream
from quorumvault.shamir import Share, share
from quorumvault.vss import ShareCommitment, commit_coefficients, verify_share

PARAMS = small_test_params()
F = PARAMS.field()


def test_completeness_by_construction():
    rng = SeedStream("vss")
    for trial in range(20):
        secret = rng.field_element(31)
        shares, coeffs = share(F, secret, 3, 5, rng.split(str(trial)))
        com = commit_coefficients(PARAMS, coeffs)
        assert com.threshold == 3
        assert all(verify_share(PARAMS, com, s) for s in shares)


def test_single_perturbation_rejected():
    rng = SeedStream("vss-perturb")
    for trial in range(20):
        shares, coeffs = share(F, rng.field_element(31), 3, 5, rng.split(str(trial)))
        com = commit_coefficients(PARAMS, coeffs)
        victim = shares[rng.randrange(5)]
        bumped = Share(victim.index, F.add(victim.value, 1 + rng.randrange(30)))
        assert not verify_share(PARAMS, com, bumped)


def test_oracle_polynomial_group_membership():
    # exponentiation oracle over the small group: commitments for
    # f(x) = 7 + 2x + x^2 accept exactly the 5 honest shares
    group = PARAMS.require_group()
    coeffs = [7, 2, 1]
    com = ShareCommitment(tuple(pow(group.g, a, group.q) for a in coeffs))
    honest = {i: (7 + 2 * i + i * i) % 31 for i in range(1, 6)}
    for i in range(1, 6):
        for v in range(31):
            expected = v == honest[i]
            assert verify_share(PARAMS, com, Share(i, v)) is expected


def test_requires_commitment_group():
    bare = FieldParams(31)
    with pytest.raises(NoCommitmentGroup):
        commit_coefficients(bare, [1, 2, 3])


def test_default_group_verifies_at_full_scale():
    params = default_params(with_commitments=True)
    f = params.field()
    rng = SeedStream("vss-big")
    shares, coeffs = share(f, rng.field_element(f.p), 3, 5, rng)
    com = commit_coefficients(params, coeffs)
    assert all(verify_share(params, com, s) for s in shares)
    tampered = Share(shares[0].index, f.add(shares[0].value, 1))
    assert not verify_share(params, com, tampered)


def test_commitment_wire_round_trip():
    com = ShareCommitment((5, 7, 11))
    assert ShareCommitment.from_wire(com.to_wire()) == com
