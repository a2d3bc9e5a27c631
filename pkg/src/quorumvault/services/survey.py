"""Survey schemas, declared queries, and answer encoding.

A schema is a flat map of attributes, each boolean or unsigned with a width
of at most 16 bits. Respondents encode numeric answers in the dual form
(integer sharing plus bit sharings) and booleans as single bit sharings;
nodes verify the encodings jointly before accepting a submission. Queries
are declared at creation time and are the only statistics that will ever be
computed or published.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import BadSchema, SchemaMismatch
from ..mpc.circuits import validate_predicate
from ..mpc.values import MAX_WIDTH


def validate_schema(schema: dict, p: int) -> None:
    if not schema or not isinstance(schema, dict):
        raise BadSchema("schema must be a non-empty attribute map")
    for name, spec in schema.items():
        if not isinstance(name, str) or not name:
            raise BadSchema("attribute names must be non-empty strings")
        t = spec.get("type")
        if t == "bool":
            continue
        if t != "uint":
            raise BadSchema(f"attribute {name!r} has unknown type {t!r}")
        width = spec.get("width")
        if not isinstance(width, int) or not 1 <= width <= MAX_WIDTH:
            raise BadSchema(f"attribute {name!r} width must be 1..{MAX_WIDTH}")
        if (1 << width) >= p:
            raise BadSchema(f"attribute {name!r} width {width} exceeds the field")


def attr_width(schema: dict, attr: str) -> int:
    return 1 if schema[attr]["type"] == "bool" else schema[attr]["width"]


def validate_answers(schema: dict, answers: dict) -> None:
    if set(answers) != set(schema):
        raise SchemaMismatch(f"answers {sorted(answers)} != schema {sorted(schema)}")
    for attr, value in answers.items():
        if not isinstance(value, int) or value < 0:
            raise SchemaMismatch(f"answer {attr!r} must be a nonnegative integer")
        if value >= (1 << attr_width(schema, attr)):
            raise SchemaMismatch(f"answer {attr!r} = {value} overflows its width")


@dataclass(frozen=True)
class StatQuery:
    """A declared statistic: a count, optionally as a percentage."""

    query_id: str
    predicate: dict
    percentage_of: dict | None = None  # denominator predicate

    def validate(self, schema: dict) -> None:
        validate_predicate(schema, self.predicate)
        if self.percentage_of is not None:
            validate_predicate(schema, self.percentage_of)

    def to_wire(self) -> dict:
        d = {"query_id": self.query_id, "predicate": self.predicate}
        if self.percentage_of is not None:
            d["percentage_of"] = self.percentage_of
        return d

    @classmethod
    def from_wire(cls, d: dict) -> StatQuery:
        return cls(d["query_id"], d["predicate"], d.get("percentage_of"))


def format_percentage(numerator: int, denominator: int) -> str:
    """Two-decimal fixed point; the operands are published alongside."""
    if denominator == 0:
        return "0.00"
    return f"{numerator * 10000 // denominator / 100:.2f}"
