"""Deterministic message fabric for in-process clusters.

Each ordered pair of actors is a link modelling the wire contract: a
reliable ordered stream, so messages between the same two parties never
reorder. The scheduler interleaves ACROSS links, FIFO or by a seeded draw,
so any asynchrony the seed selects is reproduced exactly on replay.
Deliveries to crashed nodes are dropped (in-flight loss), and every
delivered envelope lands in the transcript in delivery order, which is what
determinism hashes and adversary views are built from.
"""

from __future__ import annotations

import hashlib
from collections import deque

from ..rng import SeedStream
from ..wire import Envelope, canonical


class SimNetwork:
    def __init__(self, seed: int | str = 0, schedule: str = "seeded"):
        if schedule not in ("seeded", "fifo"):
            raise ValueError(f"schedule {schedule!r}")
        self.schedule = schedule
        self.rng = SeedStream(seed, "scheduler")
        self.links: dict[tuple[str, str], deque[Envelope]] = {}
        self._link_order: list[tuple[str, str]] = []
        self.nodes: dict[int, object] = {}
        self.up: dict[int, bool] = {}
        self.boxes: dict[str, list[Envelope]] = {}
        self.transcript: list[dict] = []
        self.dropped: list[Envelope] = []

    def attach_node(self, index: int, state) -> None:
        self.nodes[index] = state
        self.up[index] = True

    def detach_node(self, index: int) -> None:
        self.up[index] = False

    def send(self, env: Envelope) -> None:
        key = (env.sender, env.recipient)
        if key not in self.links:
            self.links[key] = deque()
            self._link_order.append(key)
        self.links[key].append(env)

    def pump(self) -> None:
        """Deliver until quiescent; each delivery may enqueue more."""
        while True:
            ready = [k for k in self._link_order if self.links[k]]
            if not ready:
                return
            key = ready[0] if self.schedule == "fifo" else ready[self.rng.randrange(len(ready))]
            self._deliver(self.links[key].popleft())

    def _deliver(self, env: Envelope) -> None:
        recipient = env.recipient
        if recipient.startswith("n:"):
            index = int(recipient[2:])
            if not self.up.get(index, False):
                self.dropped.append(env)
                return
            self.transcript.append(env.to_wire())
            for out in self.nodes[index].handle(env):
                self.send(out)
        else:
            self.transcript.append(env.to_wire())
            self.boxes.setdefault(recipient, []).append(env)

    def transcript_hash(self) -> str:
        return hashlib.sha256(canonical(self.transcript)).hexdigest()

    def received_by(self, identities: set[str]) -> list[dict]:
        """Delivered envelopes visible to a set of actors (adversary views)."""
        return [t for t in self.transcript if t["to"] in identities]

    def scan_transcript(self, needle: bytes) -> list[int]:
        """Transcript positions whose serialized envelope contains needle."""
        return [i for i, t in enumerate(self.transcript) if needle in canonical(t)]


class SimClientChannel:
    """Client-side view: send envelopes, pump, drain the inbox."""

    def __init__(self, network: SimNetwork, identity: str):
        self.network = network
        self.identity = identity

    def send(self, env: Envelope) -> None:
        self.network.send(env)

    def poll(self) -> list[Envelope]:
        self.network.pump()
        box = self.network.boxes.get(self.identity, [])
        self.network.boxes[self.identity] = []
        return box
