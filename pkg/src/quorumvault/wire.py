"""Envelope format, canonical JSON, MACs, and stream framing.

Every message between actors is an Envelope: versioned, sequence-numbered
per (session, sender), MAC'd over its canonical serialization with the
session key. On sockets, envelopes ride length-delimited inside an
AEAD-encrypted byte stream; in the simulated transport they travel as-is
(the MAC still guards integrity end to end).
"""

from __future__ import annotations

import hmac
import json
import hashlib
from dataclasses import dataclass, replace

from .errors import BadSeq, BadSignature

PROTOCOL_VERSION = 1


def canonical(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class Envelope:
    session: str
    seq: int
    sender: str
    recipient: str
    kind: str
    body: dict
    mac: str = ""
    v: int = PROTOCOL_VERSION

    def signing_form(self) -> bytes:
        return canonical({"v": self.v, "session": self.session, "seq": self.seq,
                          "from": self.sender, "to": self.recipient,
                          "kind": self.kind, "body": self.body})

    def with_mac(self, key: bytes) -> Envelope:
        return replace(self, mac=hmac.new(key, self.signing_form(), hashlib.sha256).hexdigest())

    def verify_mac(self, key: bytes) -> None:
        expected = hmac.new(key, self.signing_form(), hashlib.sha256).hexdigest()
        if not hmac.compare_digest(expected, self.mac):
            raise BadSignature(f"envelope MAC mismatch on kind {self.kind}")

    def to_wire(self) -> dict:
        return {"v": self.v, "session": self.session, "seq": self.seq,
                "from": self.sender, "to": self.recipient, "kind": self.kind,
                "body": self.body, "mac": self.mac}

    def encode(self) -> bytes:
        return canonical(self.to_wire())

    @classmethod
    def from_wire(cls, d: dict) -> Envelope:
        if set(d) != {"v", "session", "seq", "from", "to", "kind", "body", "mac"}:
            raise ValueError(f"malformed envelope keys: {sorted(d)}")
        return cls(d["session"], int(d["seq"]), d["from"], d["to"], d["kind"],
                   d["body"], d["mac"], int(d["v"]))

    @classmethod
    def decode(cls, raw: bytes) -> Envelope:
        return cls.from_wire(json.loads(raw.decode()))


class SeqTracker:
    """Strictly-increasing sequence enforcement per (session, sender)."""

    def __init__(self):
        self._last: dict[tuple[str, str], int] = {}

    def check(self, env: Envelope) -> None:
        key = (env.session, env.sender)
        if env.seq <= self._last.get(key, -1):
            raise BadSeq(f"seq {env.seq} not above {self._last[key]} for {key}")
        self._last[key] = env.seq


class SeqSource:
    """Outgoing counters per (session, recipient is irrelevant)."""

    def __init__(self):
        self._next: dict[str, int] = {}

    def next(self, session: str) -> int:
        n = self._next.get(session, 0)
        self._next[session] = n + 1
        return n


def frame(payload: bytes) -> bytes:
    """4-byte big-endian length prefix; caps frames at 16 MiB."""
    if len(payload) >= (1 << 24):
        raise ValueError("frame too large")
    return len(payload).to_bytes(4, "big") + payload


def read_frames(buffer: bytearray) -> list[bytes]:
    """Consume complete frames from a growing buffer; leaves partials."""
    out = []
    while len(buffer) >= 4:
        length = int.from_bytes(buffer[:4], "big")
        if len(buffer) < 4 + length:
            break
        out.append(bytes(buffer[4:4 + length]))
        del buffer[:4 + length]
    return out
