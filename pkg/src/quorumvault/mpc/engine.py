"""Per-node execution of a circuit program.

The engine is a deterministic state machine: feed it gate messages, collect
the messages it wants delivered. Local gates evaluate as soon as their
operands exist; an interactive gate first contributes (a fresh degree-t
resharing of the local product, or of a fresh random summand) and finalizes
once all n contributions are in. Nothing here blocks: early messages are
buffered per gate, so delivery order across nodes is irrelevant.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import InconsistentShares, OpenFailed, RoundDesync, ThresholdTooHigh
from ..fields import Field
from ..rng import SeedStream
from ..shamir import Share, lagrange_coeffs, reconstruct, share
from .circuits import CONST, INPUT, LIN, MUL, OPEN, RAND, Program


@dataclass(frozen=True)
class GateMsg:
    """One gate contribution; dest routes it, the rest rides the wire."""

    session: str
    gate_id: int
    sender: int
    payload: int
    dest: int = 0

    def to_wire(self) -> dict:
        return {"session": self.session, "gate_id": self.gate_id,
                "from": self.sender, "payload": str(self.payload)}

    @classmethod
    def from_wire(cls, d: dict, dest: int = 0) -> GateMsg:
        return cls(d["session"], int(d["gate_id"]), int(d["from"]), int(d["payload"]), dest)


class NodeEngine:
    """One node's view of a running session."""

    def __init__(self, session: str, index: int, field: Field, k: int, n: int,
                 program: Program, inputs: dict[str, int], rng: SeedStream):
        t = k - 1
        if 2 * t >= n:
            raise ThresholdTooHigh(f"passive multiplication needs t={t} < n/2={n / 2}")
        self.session = session
        self.index = index
        self.field = field
        self.k, self.n, self.t = k, n, t
        self.program = program
        self.inputs = inputs
        self.rng = rng
        self.values: dict[int, int] = {}          # wire -> local share
        self.pending: dict[int, dict[int, int]] = {}
        self.contributed: set[int] = set()
        self.finalized: set[int] = set()
        self.opened: dict[str, int] = {}
        self.rounds_executed = 0
        self.opens_executed = 0
        self._lambda_all = lagrange_coeffs(field, list(range(1, n + 1)), 0)

    # -- public surface ----------------------------------------------------

    def start(self) -> list[GateMsg]:
        """Evaluate everything local and emit the first contributions."""
        return self._advance()

    def receive(self, msg: GateMsg) -> list[GateMsg]:
        """Buffer one contribution; returns any newly-enabled outgoing."""
        gate = self.program.gates[msg.gate_id]
        if gate.op not in (MUL, RAND, OPEN):
            raise RoundDesync(f"gate {msg.gate_id} is not interactive")
        box = self.pending.setdefault(msg.gate_id, {})
        if msg.sender in box:
            raise RoundDesync(f"duplicate contribution for gate {msg.gate_id} from {msg.sender}")
        box[msg.sender] = msg.payload
        return self._advance()

    @property
    def done(self) -> bool:
        return len(self.finalized) == len(self.program.gates)

    def output_shares(self) -> dict[str, int]:
        return {name: self.values[wire] for name, wire in self.program.outputs.items()}

    # -- state machine -----------------------------------------------------

    def _advance(self) -> list[GateMsg]:
        out: list[GateMsg] = []
        progress = True
        while progress:
            progress = False
            for gate in self.program.gates:
                if gate.gid in self.finalized:
                    continue
                if gate.op in (CONST, INPUT, LIN):
                    progress |= self._try_local(gate)
                else:
                    if gate.gid not in self.contributed and self._deps_ready(gate):
                        out.extend(self._contribute(gate))
                        progress = True
                    if gate.gid in self.contributed:
                        progress |= self._try_finalize(gate)
        return out

    def _deps_ready(self, gate) -> bool:
        if gate.op == RAND:
            return True
        if gate.op == MUL:
            return gate.a in self.values and gate.b in self.values
        return gate.a in self.values  # OPEN

    def _try_local(self, gate) -> bool:
        if gate.op == CONST:
            # a public constant is the degree-0 sharing: every node holds it
            self.values[gate.gid] = gate.value
        elif gate.op == INPUT:
            self.values[gate.gid] = self.inputs[gate.name]
        else:
            if any(w not in self.values for _, w in gate.terms):
                return False
            acc = gate.const
            for coeff, wire in gate.terms:
                acc = (acc + coeff * self.values[wire]) % self.field.p
            self.values[gate.gid] = acc
        self.finalized.add(gate.gid)
        return True

    def _contribute(self, gate) -> list[GateMsg]:
        """Emit this node's contribution to every participant (self included)."""
        self.contributed.add(gate.gid)
        box = self.pending.setdefault(gate.gid, {})
        if gate.op == OPEN:
            payloads = {i: self.values[gate.a] for i in range(1, self.n + 1)}
        else:
            if gate.op == MUL:
                secret = self.field.mul(self.values[gate.a], self.values[gate.b])
            else:
                secret = self.rng.split(f"rand-{gate.gid}").field_element(self.field.p)
            subs, _ = share(self.field, secret, self.t + 1, self.n,
                            self.rng.split(f"reshare-{gate.gid}"))
            payloads = {s.index: s.value for s in subs}
        box[self.index] = payloads[self.index]
        return [GateMsg(self.session, gate.gid, self.index, payloads[i], dest=i)
                for i in range(1, self.n + 1) if i != self.index]

    def _try_finalize(self, gate) -> bool:
        box = self.pending.get(gate.gid, {})
        if len(box) < self.n:
            return False
        if gate.op == MUL:
            acc = 0
            for i in range(1, self.n + 1):
                acc = self.field.add(acc, self.field.mul(self._lambda_all[i - 1], box[i]))
            self.values[gate.gid] = acc
            self.rounds_executed = max(self.rounds_executed, gate.round)
        elif gate.op == RAND:
            acc = 0
            for i in range(1, self.n + 1):
                acc = self.field.add(acc, box[i])
            self.values[gate.gid] = acc
            self.rounds_executed = max(self.rounds_executed, gate.round)
        else:  # OPEN
            shares = [Share(i, box[i]) for i in range(1, self.n + 1)]
            try:
                self.opened[gate.name] = reconstruct(self.field, shares, self.k)
            except InconsistentShares as exc:
                raise OpenFailed(str(exc)) from exc
            self.opens_executed += 1
        self.finalized.add(gate.gid)
        return True
