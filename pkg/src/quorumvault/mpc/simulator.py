"""In-process five-node evaluator.

Runs the same NodeEngine state machines the node service hosts, delivering
gate messages directly instead of through envelopes. Unit tests and the
exhaustive checkers drive this layer; the harness separately asserts that
the envelope-routed path computes identical results.
"""

from __future__ import annotations

from ..errors import NotABit, OpenFailed, ReprMismatch
from ..fields import Field
from ..rng import SeedStream
from ..shamir import Share, reconstruct, share
from .circuits import MUL_BIT, CircuitBuilder, CircuitStats, Program
from .engine import GateMsg, NodeEngine
from .values import SharedValue, ValueRepr, bits_of, check_width


class LocalMpc:
    """Share tables for n nodes plus a session runner."""

    def __init__(self, field: Field, k: int = 3, n: int = 5, seed="local-mpc"):
        self.field = field
        self.k, self.n = k, n
        self.rng = seed if isinstance(seed, SeedStream) else SeedStream(seed)
        self.tables: dict[int, dict[str, int]] = {i: {} for i in range(1, n + 1)}
        self._counter = 0
        self.last_stats: CircuitStats | None = None

    # -- value intake -------------------------------------------------------

    def _fresh(self, prefix: str) -> str:
        self._counter += 1
        return f"{prefix}{self._counter}"

    def _deal(self, wire: str, secret: int, rng: SeedStream) -> None:
        shares, _ = share(self.field, secret, self.k, self.n, rng)
        for s in shares:
            self.tables[s.index][wire] = s.value

    def input(self, secret: int, repr: ValueRepr = ValueRepr.INT_ONLY,
              width: int = 0, rng: SeedStream | None = None,
              policy_ref: str | None = None) -> SharedValue:
        """Client-side sharing of a fresh value; no node sees the secret."""
        rng = rng or self.rng.split(self._fresh("in"))
        vid = self._fresh("v")
        int_wire, bit_wires = None, ()
        if repr in (ValueRepr.INT_ONLY, ValueRepr.DUAL):
            int_wire = f"{vid}:int"
            self._deal(int_wire, secret % self.field.p, rng.split("int"))
        if repr in (ValueRepr.BITS_ONLY, ValueRepr.DUAL):
            check_width(width, self.field.p)
            bits = bits_of(secret, width)
            bit_wires = tuple(f"{vid}:b{i}" for i in range(width))
            for i, b in enumerate(bits):
                self._deal(bit_wires[i], b, rng.split(f"b{i}"))
        return SharedValue(vid, repr, width, self.k, int_wire, bit_wires, policy_ref)

    def input_bit_shares(self, bits: list[int], width: int, int_secret: int,
                         rng: SeedStream | None = None) -> SharedValue:
        """Dual intake with caller-chosen bits; lets tests submit bad encodings."""
        rng = rng or self.rng.split(self._fresh("in"))
        check_width(width, self.field.p)
        vid = self._fresh("v")
        int_wire = f"{vid}:int"
        self._deal(int_wire, int_secret % self.field.p, rng.split("int"))
        bit_wires = tuple(f"{vid}:b{i}" for i in range(width))
        for i, b in enumerate(bits):
            self._deal(bit_wires[i], b % self.field.p, rng.split(f"b{i}"))
        return SharedValue(vid, ValueRepr.DUAL, width, self.k, int_wire, bit_wires)

    # -- local (zero-round) operations ---------------------------------------

    def _require_int(self, v: SharedValue) -> str:
        """Arithmetic operand wire: the integer sharing, or a lone bit."""
        if v.has_int:
            return v.int_wire
        if v.has_bits and v.width == 1:
            return v.bit_wires[0]
        raise ReprMismatch(f"{v.vid} carries no integer sharing")

    def add(self, a: SharedValue, b: SharedValue | int) -> SharedValue:
        """Share-wise addition; a public constant shifts every share."""
        wa = self._require_int(a)
        vid = self._fresh("v")
        wire = f"{vid}:int"
        if isinstance(b, int):
            for i in range(1, self.n + 1):
                self.tables[i][wire] = self.field.add(self.tables[i][wa], b % self.field.p)
        else:
            if b.k != a.k:
                raise ReprMismatch("mismatched thresholds")
            wb = self._require_int(b)
            for i in range(1, self.n + 1):
                self.tables[i][wire] = self.field.add(self.tables[i][wa], self.tables[i][wb])
        return SharedValue(vid, ValueRepr.INT_ONLY, a.width, self.k, wire)

    def scale(self, c: int, a: SharedValue) -> SharedValue:
        wa = self._require_int(a)
        vid = self._fresh("v")
        wire = f"{vid}:int"
        for i in range(1, self.n + 1):
            self.tables[i][wire] = self.field.mul(c % self.field.p, self.tables[i][wa])
        return SharedValue(vid, ValueRepr.INT_ONLY, a.width, self.k, wire)

    def bits_to_int(self, v: SharedValue) -> SharedValue:
        """Node-local weighted bit sum; zero rounds."""
        if not v.has_bits:
            raise ReprMismatch(f"{v.vid} carries no bit sharing")
        check_width(v.width, self.field.p)
        vid = self._fresh("v")
        wire = f"{vid}:int"
        for i in range(1, self.n + 1):
            acc = 0
            for j, bw in enumerate(v.bit_wires):
                acc = self.field.add(acc, self.field.mul(1 << j, self.tables[i][bw]))
            self.tables[i][wire] = acc
        return SharedValue(vid, ValueRepr.INT_ONLY, v.width, self.k, wire)

    # -- interactive operations ----------------------------------------------

    def run_program(self, program: Program, input_wires: dict[str, str],
                    session: str | None = None) -> tuple[dict[str, dict[int, int]], dict[str, int], CircuitStats]:
        """Drive all n engines to completion; returns (output shares, opened, stats)."""
        session = session or self._fresh("s")
        engines = {}
        for i in range(1, self.n + 1):
            inputs = {name: self.tables[i][wire] for name, wire in input_wires.items()}
            engines[i] = NodeEngine(session, i, self.field, self.k, self.n,
                                    program, inputs, self.rng.split(f"{session}-n{i}"))
        queue: list[GateMsg] = []
        for i in range(1, self.n + 1):
            queue.extend(engines[i].start())
        while queue:
            msg = queue.pop(0)
            queue.extend(engines[msg.dest].receive(msg))
        if not all(e.done for e in engines.values()):
            raise OpenFailed(f"session {session} deadlocked")
        outputs: dict[str, dict[int, int]] = {name: {} for name in program.outputs}
        for i, e in engines.items():
            for name, val in e.output_shares().items():
                outputs[name][i] = val
        stats = CircuitStats(
            comparisons=program.stats.comparisons,
            top_level_mults=program.stats.top_level_mults,
            internal_bit_mults=program.stats.internal_bit_mults,
            rounds=engines[1].rounds_executed,
            opens=engines[1].opens_executed,
        )
        self.last_stats = stats
        opened = dict(engines[1].opened)
        for i, e in engines.items():
            if e.opened != opened:
                raise OpenFailed("nodes opened diverging values")
        return outputs, opened, stats

    def _store_outputs(self, outputs: dict[str, dict[int, int]], wire_names: dict[str, str]) -> None:
        for name, per_node in outputs.items():
            for i, val in per_node.items():
                self.tables[i][wire_names[name]] = val

    def mul(self, a: SharedValue, b: SharedValue) -> SharedValue:
        wa, wb = self._require_int(a), self._require_int(b)
        builder = CircuitBuilder(self.field)
        x, y = builder.input("a"), builder.input("b")
        builder.output("out", builder.mul(x, y))
        program = builder.build()
        vid = self._fresh("v")
        wire = f"{vid}:int"
        outputs, _, _ = self.run_program(program, {"a": wa, "b": wb})
        self._store_outputs(outputs, {"out": wire})
        return SharedValue(vid, ValueRepr.INT_ONLY, a.width, self.k, wire)

    def bool_op(self, op: str, *vals: SharedValue) -> SharedValue:
        """AND / OR / XOR / NOT on shared bits; NOT is local."""
        wires = [self._require_int(v) if v.has_int else v.bit_wires[0] for v in vals]
        builder = CircuitBuilder(self.field)
        ins = [builder.input(f"x{i}") for i in range(len(wires))]
        if op == "NOT":
            out = builder.not_(ins[0])
        elif op == "AND":
            out = builder.and_(ins[0], ins[1])
        elif op == "OR":
            out = builder.or_(ins[0], ins[1])
        elif op == "XOR":
            out = builder.xor_(ins[0], ins[1])
        else:
            raise ValueError(f"op {op!r}")
        builder.output("out", out)
        program = builder.build()
        vid = self._fresh("v")
        wire = f"{vid}:int"
        outputs, _, _ = self.run_program(program, {f"x{i}": w for i, w in enumerate(wires)})
        self._store_outputs(outputs, {"out": wire})
        return SharedValue(vid, ValueRepr.INT_ONLY, 1, self.k, wire)

    def compare_public(self, v: SharedValue, bound: int, direction: str = "less") -> SharedValue:
        """Shared indicator bit for v < bound (or v > bound), bound public."""
        if not v.has_bits:
            raise ReprMismatch("comparison needs the bitwise representation")
        builder = CircuitBuilder(self.field)
        bit_ins = tuple(builder.input(f"b{i}") for i in range(v.width))
        builder.output("out", builder.compare_public(bit_ins, bound, direction))
        program = builder.build()
        vid = self._fresh("v")
        wire = f"{vid}:int"
        outputs, _, _ = self.run_program(
            program, {f"b{i}": w for i, w in enumerate(v.bit_wires)})
        self._store_outputs(outputs, {"out": wire})
        return SharedValue(vid, ValueRepr.INT_ONLY, 1, self.k, wire)

    def consistency_check(self, v: SharedValue) -> bool:
        """Open int - sum(2^i * bit_i) and a masked booleanity probe per bit.

        Both openings reveal nothing about an honest submission: the
        difference is identically zero and each probe is r*b*(1-b) for a
        fresh joint random r.
        """
        if v.repr != ValueRepr.DUAL:
            raise ReprMismatch("consistency check needs the dual representation")
        builder = CircuitBuilder(self.field)
        int_in = builder.input("int")
        bit_ins = [builder.input(f"b{i}") for i in range(v.width)]
        diff = builder.lin([(1, int_in)] + [(-(1 << i), b) for i, b in enumerate(bit_ins)])
        builder.open(diff, "diff")
        for i, b in enumerate(bit_ins):
            probe = builder.mul(builder.rand(),
                                builder.mul(b, builder.not_(b), MUL_BIT), MUL_BIT)
            builder.open(probe, f"bit{i}")
        program = builder.build()
        wires = {"int": v.int_wire}
        wires.update({f"b{i}": w for i, w in enumerate(v.bit_wires)})
        _, opened, _ = self.run_program(program, wires)
        return all(val == 0 for val in opened.values())

    def open(self, v: SharedValue) -> int:
        """Reconstruct from all node tables with the subset cross-check."""
        wire = self._require_int(v)
        shares = [Share(i, self.tables[i][wire]) for i in range(1, self.n + 1)]
        try:
            return reconstruct(self.field, shares, self.k)
        except Exception as exc:
            raise OpenFailed(str(exc)) from exc

    def open_bit(self, v: SharedValue) -> int:
        val = self.open(v)
        if val not in (0, 1):
            raise NotABit(f"opened {val}")
        return val

    def open_bits(self, v: SharedValue) -> list[int]:
        out = []
        for bw in v.bit_wires:
            shares = [Share(i, self.tables[i][bw]) for i in range(1, self.n + 1)]
            out.append(reconstruct(self.field, shares, self.k))
        return out
