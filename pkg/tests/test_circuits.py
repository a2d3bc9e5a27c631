import pytest

from quorumvault.errors import TypeMismatch, UnknownAttribute
from quorumvault.fields import DEFAULT_PRIME, Field
from quorumvault.mpc import LocalMpc, ValueRepr, compile_predicate
from quorumvault.mpc.circuits import CircuitBuilder, validate_predicate

FBIG = Field(DEFAULT_PRIME)

SCHEMA = {
    "female": {"type": "bool"},
    "age": {"type": "uint", "width": 8},
    "diabetes": {"type": "bool"},
    "coeliac": {"type": "bool"},
}

EXAMPLE_PREDICATE = {
    "all": [
        {"attr": "female"},
        {"attr": "age", "min": 32, "max": 40},
        {"attr": "diabetes"},
        {"attr": "coeliac"},
    ]
}


def test_example_predicate_costs():
    # the age range compiles to 2 strict comparisons with adjusted bounds;
    # five wire literals fold with 4 top-level ANDs
    _, stats = compile_predicate(FBIG, SCHEMA, EXAMPLE_PREDICATE)
    assert stats.comparisons == 2
    assert stats.top_level_mults == 4
    assert stats.internal_bit_mults <= 2 * 8 * 2


def test_single_boolean_literal_is_free():
    _, stats = compile_predicate(FBIG, SCHEMA, {"all": [{"attr": "diabetes"}]})
    assert stats.comparisons == 0
    assert stats.top_level_mults == 0
    assert stats.internal_bit_mults == 0


def test_one_sided_ranges():
    _, stats = compile_predicate(FBIG, SCHEMA, {"all": [{"attr": "age", "min": 30}]})
    assert stats.comparisons == 1
    # bounds at the width edge are always-true and dropped
    _, stats = compile_predicate(FBIG, SCHEMA, {"all": [{"attr": "age", "min": 0, "max": 255}]})
    assert stats.comparisons == 0


def test_unknown_attribute():
    with pytest.raises(UnknownAttribute):
        validate_predicate(SCHEMA, {"all": [{"attr": "height"}]})


def test_type_mismatch():
    with pytest.raises(TypeMismatch):
        validate_predicate(SCHEMA, {"all": [{"attr": "female", "min": 1}]})
    with pytest.raises(TypeMismatch):
        validate_predicate(SCHEMA, {"all": [{"attr": "age"}]})
    with pytest.raises(TypeMismatch):
        validate_predicate(SCHEMA, {"all": []})


def record_wires(mpc, record):
    """Share one record's attributes bitwise; returns engine input wiring."""
    wires = {}
    for attr in sorted(SCHEMA):
        width = 1 if SCHEMA[attr]["type"] == "bool" else SCHEMA[attr]["width"]
        v = mpc.input(record[attr], ValueRepr.BITS_ONLY, width=width)
        for i, w in enumerate(v.bit_wires):
            wires[f"r:{attr}:b{i}"] = w
    return wires


def plaintext_predicate(record):
    return int(record["female"] == 1 and 32 <= record["age"] <= 40
               and record["diabetes"] == 1 and record["coeliac"] == 1)


def test_example_predicate_evaluates_correctly():
    mpc = LocalMpc(FBIG, seed="pred")
    program, _ = compile_predicate(FBIG, SCHEMA, EXAMPLE_PREDICATE)
    records = [
        {"female": 1, "age": 35, "diabetes": 1, "coeliac": 1},
        {"female": 1, "age": 50, "diabetes": 1, "coeliac": 1},
        {"female": 0, "age": 35, "diabetes": 1, "coeliac": 1},
        {"female": 1, "age": 33, "diabetes": 0, "coeliac": 1},
        {"female": 1, "age": 32, "diabetes": 1, "coeliac": 1},
        {"female": 1, "age": 40, "diabetes": 1, "coeliac": 1},
        {"female": 1, "age": 41, "diabetes": 1, "coeliac": 1},
        {"female": 1, "age": 31, "diabetes": 1, "coeliac": 1},
    ]
    for record in records:
        wires = record_wires(mpc, record)
        outputs, _, _ = mpc.run_program(program, wires)
        from quorumvault.shamir import Share, reconstruct
        got = reconstruct(FBIG, [Share(i, v) for i, v in outputs["indicator"].items()], 3)
        assert got == plaintext_predicate(record), record


def test_conjunction_counting():
    builder = CircuitBuilder(FBIG)
    wires = [builder.input(f"x{i}") for i in range(5)]
    builder.conj(wires)
    assert builder.stats.top_level_mults == 4
    builder2 = CircuitBuilder(FBIG)
    builder2.conj([builder2.input("x")])
    assert builder2.stats.top_level_mults == 0


def test_constant_folding_keeps_public_math_free():
    builder = CircuitBuilder(FBIG)
    c1, c2 = builder.const(3), builder.const(4)
    prod = builder.mul(c1, c2)
    assert builder.stats.top_level_mults == 0
    x = builder.input("x")
    scaled = builder.mul(prod, x)  # const * wire folds to lin
    assert builder.stats.top_level_mults == 0
    assert builder.gates[scaled].op == "lin"
