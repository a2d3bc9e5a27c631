"""Circuit construction and gate accounting.

Gates: CONST and INPUT seed wires, LIN is any node-local affine combination,
MUL and RAND are interactive (one round each, independent gates in the same
round batch into one message per node pair), OPEN publishes a wire. The
builder constant-folds aggressively, so multiplying by a public wire never
costs a round; that is what makes the first step of a comparison scan free.

Multiplications are tallied by role: conjunctions of predicate literals
count as top-level, the scan steps inside a comparison (and the boolean
checks of the consistency circuit) count as internal bit work. A comparison
against a public bound costs at most 2*width internal multiplications.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import TypeMismatch, UnknownAttribute, WidthMismatch
from ..fields import Field

CONST = "const"
INPUT = "input"
LIN = "lin"
MUL = "mul"
RAND = "rand"
OPEN = "open"

MUL_TOP = "top"
MUL_BIT = "bit"


@dataclass
class CircuitStats:
    """Static cost of a circuit plus the rounds the engine executed.

    rounds counts interactive MUL/RAND layers; output openings are tallied
    separately in opens so a lone addition is visibly zero-round.
    """

    comparisons: int = 0
    top_level_mults: int = 0
    internal_bit_mults: int = 0
    rounds: int = 0
    opens: int = 0

    def merge(self, other: CircuitStats) -> None:
        self.comparisons += other.comparisons
        self.top_level_mults += other.top_level_mults
        self.internal_bit_mults += other.internal_bit_mults
        self.rounds = max(self.rounds, other.rounds)
        self.opens += other.opens


@dataclass(frozen=True)
class Gate:
    gid: int
    op: str
    value: int = 0                                  # CONST payload
    name: str = ""                                  # INPUT name / OPEN tag
    terms: tuple[tuple[int, int], ...] = ()         # LIN: (coeff, wire)
    const: int = 0                                  # LIN constant
    a: int = -1                                     # MUL operands
    b: int = -1
    round: int = 0                                  # interactive layer


@dataclass
class Program:
    gates: list[Gate]
    outputs: dict[str, int]
    total_rounds: int
    open_tags: tuple[str, ...]
    stats: CircuitStats


class CircuitBuilder:
    """Builds a Program; wires are gate ids, emitted operands-first."""

    def __init__(self, field: Field):
        self.field = field
        self.gates: list[Gate] = []
        self.stats = CircuitStats()
        self.outputs: dict[str, int] = {}
        self._known: dict[int, int] = {}   # wire -> public constant, when known
        self._round: dict[int, int] = {}   # wire -> interactive depth

    # -- gate emission ----------------------------------------------------

    def _emit(self, gate: Gate) -> int:
        self.gates.append(gate)
        return gate.gid

    def _next(self) -> int:
        return len(self.gates)

    def const(self, value: int) -> int:
        gid = self._emit(Gate(self._next(), CONST, value=value % self.field.p))
        self._known[gid] = value % self.field.p
        self._round[gid] = 0
        return gid

    def input(self, name: str) -> int:
        gid = self._emit(Gate(self._next(), INPUT, name=name))
        self._round[gid] = 0
        return gid

    def lin(self, terms: list[tuple[int, int]], const: int = 0) -> int:
        """Affine combination sum(coeff * wire) + const; folds constants."""
        p = self.field.p
        folded: list[tuple[int, int]] = []
        acc = const % p
        for coeff, wire in terms:
            coeff %= p
            if coeff == 0:
                continue
            if wire in self._known:
                acc = (acc + coeff * self._known[wire]) % p
            else:
                folded.append((coeff, wire))
        if not folded:
            return self.const(acc)
        gid = self._emit(Gate(self._next(), LIN, terms=tuple(folded), const=acc))
        self._round[gid] = max(self._round[w] for _, w in folded)
        return gid

    def mul(self, a: int, b: int, kind: str = MUL_TOP) -> int:
        ka, kb = self._known.get(a), self._known.get(b)
        if ka is not None and kb is not None:
            return self.const(ka * kb)
        if ka is not None:
            return self.lin([(ka, b)])
        if kb is not None:
            return self.lin([(kb, a)])
        rnd = max(self._round[a], self._round[b]) + 1
        gid = self._emit(Gate(self._next(), MUL, a=a, b=b, round=rnd))
        self._round[gid] = rnd
        if kind == MUL_TOP:
            self.stats.top_level_mults += 1
        else:
            self.stats.internal_bit_mults += 1
        return gid

    def rand(self) -> int:
        gid = self._emit(Gate(self._next(), RAND, round=1))
        self._round[gid] = 1
        return gid

    def open(self, wire: int, tag: str) -> None:
        self._emit(Gate(self._next(), OPEN, a=wire, name=tag))
        self.stats.opens += 1

    def output(self, name: str, wire: int) -> None:
        self.outputs[name] = wire

    # -- boolean algebra on shared bits -----------------------------------

    def not_(self, x: int) -> int:
        return self.lin([(-1, x)], 1)

    def and_(self, x: int, y: int, kind: str = MUL_TOP) -> int:
        return self.mul(x, y, kind)

    def or_(self, x: int, y: int, kind: str = MUL_TOP) -> int:
        # x + y - xy
        return self.lin([(1, x), (1, y), (-1, self.mul(x, y, kind))])

    def xor_(self, x: int, y: int, kind: str = MUL_TOP) -> int:
        # x + y - 2xy
        return self.lin([(1, x), (1, y), (-2, self.mul(x, y, kind))])

    def conj(self, wires: list[int]) -> int:
        """Conjunction by left fold: j literals cost j-1 top-level ANDs."""
        if not wires:
            return self.const(1)
        acc = wires[0]
        for w in wires[1:]:
            acc = self.and_(acc, w, MUL_TOP)
        return acc

    # -- public-threshold comparison ---------------------------------------

    def compare_public(self, bit_wires: tuple[int, ...], bound: int, direction: str) -> int:
        """Strict comparison of a bit-shared value against a public bound.

        MSB-to-LSB scan keeping shared (result, still-equal); with a public
        bound bit t_i the XOR inside the equality update is local, so each
        step costs at most two internal multiplications and the first step
        (and the final equality update) cost none.
        """
        width = len(bit_wires)
        if not 0 <= bound < (1 << width):
            raise WidthMismatch(f"bound {bound} does not fit width {width}")
        if direction not in ("less", "greater"):
            raise ValueError(f"direction {direction!r}")
        self.stats.comparisons += 1
        if (direction == "less" and bound == 0) or (
            direction == "greater" and bound == (1 << width) - 1
        ):
            return self.const(0)  # strict comparison can never hold
        result = self.const(0)
        eq = self.const(1)
        for i in range(width - 1, -1, -1):
            b = bit_wires[i]
            t = (bound >> i) & 1
            if direction == "less" and t == 1:
                # bound bit wins: value bit 0 makes value smaller here
                hit = self.mul(eq, self.not_(b), MUL_BIT)
                result = self.lin([(1, result), (1, hit)])
            elif direction == "greater" and t == 0:
                hit = self.mul(eq, b, MUL_BIT)
                result = self.lin([(1, result), (1, hit)])
            if i > 0:
                # eq *= 1 - (b XOR t); XOR with the public bit is local
                same = b if t == 1 else self.not_(b)
                eq = self.mul(eq, same, MUL_BIT)
        return result

    # -- finalize ----------------------------------------------------------

    def build(self) -> Program:
        total = max((g.round for g in self.gates if g.op in (MUL, RAND)), default=0)
        self.stats.rounds = total
        tags = tuple(g.name for g in self.gates if g.op == OPEN)
        return Program(self.gates, dict(self.outputs), total, tags, self.stats)


# -- predicates over survey schemas ----------------------------------------


def validate_predicate(schema: dict[str, dict], predicate: dict) -> None:
    """Conjunction of boolean literals and inclusive numeric ranges.

    predicate = {"all": [ {"attr": name} | {"attr": name, "min": a, "max": b} ]}
    """
    literals = predicate.get("all")
    if not isinstance(literals, list) or not literals:
        raise TypeMismatch("predicate must be a non-empty conjunction")
    for lit in literals:
        attr = lit.get("attr")
        if attr not in schema:
            raise UnknownAttribute(f"attribute {attr!r} not in schema")
        is_range = "min" in lit or "max" in lit
        if schema[attr]["type"] == "bool" and is_range:
            raise TypeMismatch(f"range literal on boolean attribute {attr!r}")
        if schema[attr]["type"] != "bool" and not is_range:
            raise TypeMismatch(f"numeric attribute {attr!r} needs a range")


def predicate_wire(builder: CircuitBuilder, schema: dict[str, dict], predicate: dict,
                   attr_bits: dict[str, tuple[int, ...]]) -> int:
    """Compile the predicate against one record's bit wires -> indicator bit.

    Every range bound becomes one strict public comparison with adjusted
    bounds (a <= x <= b is not(x < a) and (x < b + 1)); bounds at the edge
    of the width are dropped as always-true.
    """
    validate_predicate(schema, predicate)
    literals: list[int] = []
    for lit in predicate["all"]:
        attr = lit["attr"]
        bits = attr_bits[attr]
        if schema[attr]["type"] == "bool":
            literals.append(bits[0])
            continue
        width = schema[attr]["width"]
        lo, hi = lit.get("min"), lit.get("max")
        if lo is not None and lo > 0:
            literals.append(builder.not_(builder.compare_public(bits, lo, "less")))
        if hi is not None and hi + 1 < (1 << width):
            literals.append(builder.compare_public(bits, hi + 1, "less"))
    return builder.conj(literals)


def compile_predicate(field: Field, schema: dict[str, dict], predicate: dict,
                      record_name: str = "r") -> tuple[Program, CircuitStats]:
    """Standalone per-record predicate circuit; opens the indicator bit."""
    builder = CircuitBuilder(field)
    attr_bits = {}
    for attr in sorted(schema):
        width = 1 if schema[attr]["type"] == "bool" else schema[attr]["width"]
        attr_bits[attr] = tuple(builder.input(f"{record_name}:{attr}:b{i}") for i in range(width))
    wire = predicate_wire(builder, schema, predicate, attr_bits)
    builder.output("indicator", wire)
    program = builder.build()
    return program, program.stats
