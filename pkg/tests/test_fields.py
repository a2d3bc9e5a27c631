import pytest

from quorumvault.errors import ZeroInverse
from quorumvault.fields import (
    DEFAULT_PRIME,
    CommitmentGroup,
    Field,
    FieldParams,
    default_params,
    is_prime,
    small_test_params,
)

F31 = Field(31)


def test_additive_inverse_wraps():
    assert F31.add(7, 24) == 0


def test_mul_reduces():
    # direct evaluation: 36 mod 31
    assert F31.mul(6, 6) == 36 % 31


@pytest.mark.parametrize("p", [3, 5, 31, DEFAULT_PRIME])
def test_mul_identity(p):
    f = Field(p)
    for a in (0, 1, 2, p - 1):
        assert f.mul(a % p, 1) == a % p


def test_inverse_by_brute_force_oracle():
    # oracle: search Z_31 for the inverse of 2
    expected = next(x for x in range(1, 31) if (2 * x) % 31 == 1)
    assert expected == 16
    assert F31.inv(2) == expected
    assert F31.inv(1) == 1


def test_inverse_of_zero_rejected():
    with pytest.raises(ZeroInverse):
        F31.inv(0)


def test_inverse_everywhere_small_fields():
    for p in (3, 5, 31):
        f = Field(p)
        for a in range(1, p):
            assert f.mul(a, f.inv(a)) == 1


def test_sub_neg_consistency():
    for a in range(31):
        assert F31.sub(0, a) == F31.neg(a)
        assert F31.add(a, F31.neg(a)) == 0


def test_poly_eval_horner():
    # f(x) = 7 + 2x + x^2 over Z_31
    coeffs = [7, 2, 1]
    for x in range(6):
        assert F31.poly_eval(coeffs, x) == (7 + 2 * x + x * x) % 31


def test_primality():
    assert is_prime(DEFAULT_PRIME)
    assert is_prime(31) and is_prime(311)
    assert not is_prime(1) and not is_prime(33) and not is_prime((1 << 61) + 1)


def test_field_params_validation():
    with pytest.raises(ValueError):
        FieldParams(30)
    with pytest.raises(ValueError):
        FieldParams(31, CommitmentGroup(311, 1))
    with pytest.raises(ValueError):
        FieldParams(31, CommitmentGroup(310, 7))


def test_default_commitment_group_well_formed():
    params = default_params(with_commitments=True)
    g = params.require_group()
    assert is_prime(g.q)
    assert (g.q - 1) % params.p == 0
    assert pow(g.g, params.p, g.q) == 1 and g.g != 1


def test_small_test_params():
    params = small_test_params()
    assert params.p == 31
    assert params.require_group().q == 311
