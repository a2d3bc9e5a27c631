"""Round batching: aggregating more records must not add rounds."""

from quorumvault.fields import DEFAULT_PRIME, Field
from quorumvault.node.sessions import build_compute_program, build_consistency_program

SCHEMA = {
    "female": {"type": "bool"},
    "age": {"type": "uint", "width": 8},
}

PREDICATE = {"all": [{"attr": "female"}, {"attr": "age", "min": 32, "max": 40}]}

FIELD = Field(DEFAULT_PRIME)


def test_compute_rounds_constant_in_respondents():
    rounds = []
    for count in (1, 4, 16):
        respondents = [f"u{i}" for i in range(count)]
        program = build_compute_program(FIELD, SCHEMA, PREDICATE, None, respondents)
        rounds.append(program.total_rounds)
        # gate cost grows linearly, rounds do not
        assert program.stats.comparisons == 2 * count
    assert rounds[0] == rounds[1] == rounds[2] > 0


def test_independent_gates_share_rounds():
    # two records' circuits interleave into the same layers: the per-round
    # gate population grows, the layer count does not
    one = build_compute_program(FIELD, SCHEMA, PREDICATE, None, ["a"])
    two = build_compute_program(FIELD, SCHEMA, PREDICATE, None, ["a", "b"])
    by_round_one = {}
    by_round_two = {}
    for g in one.gates:
        if g.round:
            by_round_one[g.round] = by_round_one.get(g.round, 0) + 1
    for g in two.gates:
        if g.round:
            by_round_two[g.round] = by_round_two.get(g.round, 0) + 1
    assert set(by_round_one) == set(by_round_two)
    assert all(by_round_two[r] == 2 * by_round_one[r] for r in by_round_one)


def test_consistency_program_round_depth_fixed():
    # the randomness layer and the b*(1-b) products are independent and so
    # share round 1; the masking product lands in round 2 regardless of the
    # schema width
    for schema in (SCHEMA, {"x": {"type": "uint", "width": 16}}):
        program = build_consistency_program(FIELD, schema, "resp")
        assert program.total_rounds == 2
