"""Deterministic program construction for node-hosted MPC sessions.

Every node builds the identical program from the same shared descriptors
(schema, query, sorted respondent list), so gate ids and rounds line up
across the cluster without negotiation.
"""

from __future__ import annotations

from ..fields import Field
from ..mpc.circuits import MUL_BIT, CircuitBuilder, Program, predicate_wire
from ..services.survey import attr_width
from .storage import StoredRecord


def response_input_names(schema: dict, respondent: str) -> list[str]:
    """Wire names a response contributes, in canonical order."""
    names = []
    for attr in sorted(schema):
        if schema[attr]["type"] != "bool":
            names.append(f"{respondent}:{attr}:int")
        for i in range(attr_width(schema, attr)):
            names.append(f"{respondent}:{attr}:b{i}")
    return names


def response_input_shares(schema: dict, respondent: str, record: StoredRecord) -> dict[str, int]:
    """Resolve this node's shares of a stored response into engine inputs."""
    inputs = {}
    attrs = record.payload["attrs"]
    for attr in sorted(schema):
        enc = attrs[attr]
        if schema[attr]["type"] != "bool":
            inputs[f"{respondent}:{attr}:int"] = int(enc["int"])
        for i in range(attr_width(schema, attr)):
            inputs[f"{respondent}:{attr}:b{i}"] = int(enc["bits"][i])
    return inputs


def build_consistency_program(field: Field, schema: dict, respondent: str) -> Program:
    """Dual-representation checks for one submission.

    Numeric attributes: open int - sum(2^i bit_i), accept iff zero. Every
    bit (numeric and boolean): open r*b*(1-b) for fresh joint randomness r,
    accept iff zero. Honest submissions open nothing but zeros.
    """
    b = CircuitBuilder(field)
    for attr in sorted(schema):
        width = attr_width(schema, attr)
        bits = [b.input(f"{respondent}:{attr}:b{i}") for i in range(width)]
        if schema[attr]["type"] != "bool":
            iv = b.input(f"{respondent}:{attr}:int")
            diff = b.lin([(1, iv)] + [(-(1 << i), w) for i, w in enumerate(bits)])
            b.open(diff, f"diff:{attr}")
        for i, w in enumerate(bits):
            probe = b.mul(b.rand(), b.mul(w, b.not_(w), MUL_BIT), MUL_BIT)
            b.open(probe, f"bit:{attr}:{i}")
    return b.build()


def build_compute_program(field: Field, schema: dict, predicate: dict,
                          denominator: dict | None, respondents: list[str]) -> Program:
    """Aggregate circuit: per-record indicators, locally-summed counters.

    The indicator sums are linear, so the whole aggregation costs no rounds
    beyond the per-record predicate gates, and record circuits at the same
    depth share rounds (message count stays flat as respondents grow).
    """
    b = CircuitBuilder(field)
    num_terms = []
    den_terms = []
    for r in sorted(respondents):
        attr_bits = {}
        for attr in sorted(schema):
            width = attr_width(schema, attr)
            attr_bits[attr] = tuple(b.input(f"{r}:{attr}:b{i}") for i in range(width))
        num_terms.append((1, predicate_wire(b, schema, predicate, attr_bits)))
        if denominator is not None:
            den_terms.append((1, predicate_wire(b, schema, denominator, attr_bits)))
    b.open(b.lin(num_terms), "numerator")
    if denominator is not None:
        b.open(b.lin(den_terms), "denominator")
    return b.build()
