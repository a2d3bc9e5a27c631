import pytest

from quorumvault.errors import OpenFailed, ReprMismatch, ThresholdTooHigh, WidthOverflow
from quorumvault.fields import Field
from quorumvault.mpc import LocalMpc, ValueRepr, bits_of, int_of_bits
from quorumvault.mpc.circuits import CircuitBuilder
from quorumvault.mpc.engine import NodeEngine
from quorumvault.rng import SeedStream
from quorumvault.shamir import Share, reconstruct

F31 = Field(31)


class StubRng:
    """field_element tape + transparent splitting, for pinned sharings."""

    def __init__(self, values):
        self._values = list(values)

    def split(self, label):
        return self

    def field_element(self, p):
        return self._values.pop(0) % p


def test_input_int_only_with_example_polynomial():
    mpc = LocalMpc(F31)
    v = mpc.input(7, ValueRepr.INT_ONLY, rng=StubRng([2, 1]))
    got = [mpc.tables[i][v.int_wire] for i in range(1, 6)]
    assert got == [10, 15, 22, 0, 11]


def test_input_dual_binary_expansion():
    assert bits_of(13, 4) == [1, 0, 1, 1]
    assert int_of_bits([1, 0, 1, 1]) == 13
    mpc = LocalMpc(F31)
    v = mpc.input(13, ValueRepr.DUAL, width=4)
    assert mpc.open(v) == 13
    assert mpc.open_bits(v) == [1, 0, 1, 1]


def test_input_zero_all_components_zero():
    mpc = LocalMpc(F31)
    v = mpc.input(0, ValueRepr.DUAL, width=4)
    assert mpc.open(v) == 0
    assert mpc.open_bits(v) == [0, 0, 0, 0]


def test_input_width_overflow():
    mpc = LocalMpc(F31)
    with pytest.raises(WidthOverflow):
        mpc.input(16, ValueRepr.BITS_ONLY, width=4)
    with pytest.raises(WidthOverflow):
        mpc.input(1, ValueRepr.BITS_ONLY, width=17)
    with pytest.raises(WidthOverflow):
        mpc.input(1, ValueRepr.BITS_ONLY, width=5)  # 2^5 >= 31


def test_add_opens_to_sum():
    mpc = LocalMpc(F31)
    a, b = mpc.input(3), mpc.input(4)
    assert mpc.open(mpc.add(a, b)) == 7


def test_add_identity_and_public_constant():
    mpc = LocalMpc(F31)
    x = mpc.input(9)
    assert mpc.open(mpc.add(x, 0)) == 9
    # adding public p-1 is subtracting one, mod p
    assert mpc.open(mpc.add(x, 31 - 1)) == 8


def test_add_requires_int_repr():
    mpc = LocalMpc(F31)
    x = mpc.input(3, ValueRepr.BITS_ONLY, width=2)
    y = mpc.input(1)
    with pytest.raises(ReprMismatch):
        mpc.add(x, y)


def test_mul_basic():
    mpc = LocalMpc(F31)
    a, b = mpc.input(3), mpc.input(4)
    prod = mpc.mul(a, b)
    assert mpc.open(prod) == 12
    assert mpc.last_stats.rounds == 1
    assert mpc.last_stats.top_level_mults == 1


def test_mul_annihilator():
    mpc = LocalMpc(F31)
    for b in (0, 1, 17, 30):
        assert mpc.open(mpc.mul(mpc.input(0), mpc.input(b))) == 0


def test_mul_exhaustive_smallest_five_node_field():
    # p = 7 is the smallest field with five distinct nonzero indices;
    # all 49 input pairs against plaintext
    f7 = Field(7)
    mpc = LocalMpc(f7, seed="exh7")
    for a in range(7):
        for b in range(7):
            va, vb = mpc.input(a), mpc.input(b)
            assert mpc.open(mpc.mul(va, vb)) == (a * b) % 7
            assert mpc.open(mpc.add(va, vb)) == (a + b) % 7


def test_mul_exhaustive_p5_four_nodes():
    # Z_5 hosts at most 4 nodes; k = 2 keeps t < n/2; all 25 pairs
    f5 = Field(5)
    mpc = LocalMpc(f5, k=2, n=4, seed="exh5")
    for a in range(5):
        for b in range(5):
            assert mpc.open(mpc.mul(mpc.input(a), mpc.input(b))) == (a * b) % 5


def test_mul_degree_reduction_consistency():
    # after a multiplication any k node shares interpolate consistently
    mpc = LocalMpc(F31, seed="deg")
    prod = mpc.mul(mpc.input(5), mpc.input(6))
    shares = [Share(i, mpc.tables[i][prod.int_wire]) for i in range(1, 6)]
    # cross-check over all 5 shares raises if any subset disagrees
    assert reconstruct(F31, shares, 3) == 30


def test_threshold_too_high():
    with pytest.raises(ThresholdTooHigh):
        NodeEngine("s", 1, F31, k=4, n=5, program=None, inputs={}, rng=SeedStream(0))
    mpc = LocalMpc(F31, k=4, n=5)
    with pytest.raises(ThresholdTooHigh):
        mpc.mul(mpc.input(1), mpc.input(2))


def test_addition_is_zero_rounds():
    mpc = LocalMpc(F31)
    a, b = mpc.input(3), mpc.input(4)
    before = mpc.last_stats
    mpc.add(a, b)
    # add never runs a program, so stats are untouched
    assert mpc.last_stats is before


def test_bits_to_int_round_trip():
    mpc = LocalMpc(Field((1 << 61) - 1), seed="b2i")
    rng = SeedStream("vals")
    for _ in range(10):
        val = rng.randrange(256)
        v = mpc.input(val, ValueRepr.BITS_ONLY, width=8)
        out = mpc.bits_to_int(v)
        assert mpc.open(out) == val
    assert mpc.open(mpc.bits_to_int(mpc.input(13, ValueRepr.DUAL, width=4))) == 13
    assert mpc.open(mpc.bits_to_int(mpc.input(0, ValueRepr.BITS_ONLY, width=4))) == 0


def test_scale():
    mpc = LocalMpc(F31)
    assert mpc.open(mpc.scale(4, mpc.input(9))) == (36 % 31)


def test_open_cross_check_detects_corruption():
    mpc = LocalMpc(F31, seed="corrupt")
    v = mpc.input(7)
    mpc.tables[4][v.int_wire] = (mpc.tables[4][v.int_wire] + 1) % 31
    with pytest.raises(OpenFailed):
        mpc.open(v)
