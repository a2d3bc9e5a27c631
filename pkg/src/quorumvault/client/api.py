"""The user- and operator-side protocol driver.

Every byte that leaves this code is a share, a ciphertext, or a public
record: secrets are split or sealed before any envelope is built. The
client talks to all five nodes, tolerates unreachable minorities where the
thresholds allow, and cross-checks replicated answers (registry entries,
blob hashes, published results) by majority.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey

from .. import errors
from ..errors import (
    BadKeyLength,
    BadChallengeResponse,
    NodeUnreachable,
    NoteTooLarge,
    QuorumUnreachable,
    QuorumVaultError,
    RegistryInconsistent,
    ReplicaMismatch,
)
from ..fields import Field
from ..governance import MAJORITY, NODE_COUNT, UNANIMITY, Action, Proposal, Vote, canonical
from ..mpc.values import bits_of
from ..node.config import Deployment
from ..rng import SeedStream
from ..services.crypto import (
    KEY_BYTES,
    aead_decrypt,
    aead_encrypt,
    bytes_to_elements,
    compress,
    decompress,
    elements_to_bytes,
    hkdf,
    random_key,
    seal,
    unseal,
)
from ..services.survey import attr_width
from ..shamir import Share, reconstruct, share
from ..wire import Envelope, SeqSource, sha256_hex

NOTE_CAP = 64 * 1024
EMAIL_CAP = 256 * 1024

ALL_NODES = tuple(range(1, NODE_COUNT + 1))


def resolve_threshold(spec: str | int) -> int:
    if spec == "majority":
        return MAJORITY
    if spec == "unanimity":
        return UNANIMITY
    k = int(spec)
    if not 1 <= k <= NODE_COUNT:
        raise ValueError(f"threshold {spec!r} outside 1..{NODE_COUNT}")
    return k


def _error_class(name: str):
    cls = getattr(errors, name, None)
    if isinstance(cls, type) and issubclass(cls, QuorumVaultError):
        return cls
    return QuorumVaultError


@dataclass
class NodeSession:
    node: int
    session_id: str
    key: bytes


class VaultClient:
    """One identity (user "u:..." or operator "i:...") talking to the cluster."""

    def __init__(self, identity: str, sign_key: Ed25519PrivateKey, deployment: Deployment,
                 channel, rng: SeedStream, enc_key: X25519PrivateKey | None = None):
        self.identity = identity
        self.sign_key = sign_key
        self.enc_key = enc_key
        self.deployment = deployment
        self.field = Field(deployment.p)
        self.channel = channel
        self.rng = rng
        self.sessions: dict[int, NodeSession] = {}
        self._seq = SeqSource()
        self._inbox: list[Envelope] = []

    # -- low-level plumbing ---------------------------------------------------

    def _poll_into_inbox(self) -> None:
        self._inbox.extend(self.channel.poll())

    def _take(self, predicate) -> Envelope | None:
        for i, env in enumerate(self._inbox):
            if predicate(env):
                return self._inbox.pop(i)
        return None

    def _await(self, predicate, tries: int = 50) -> Envelope:
        for _ in range(tries):
            found = self._take(predicate)
            if found is not None:
                return found
            self._poll_into_inbox()
        raise NodeUnreachable("no reply")

    # -- authentication -----------------------------------------------------------

    def connect(self, nodes: tuple[int, ...] = ALL_NODES) -> None:
        for node in nodes:
            if node not in self.sessions:
                self._handshake(node)

    def reconnect(self, node: int) -> None:
        """Establish a fresh session, e.g. after the node restarted."""
        self.sessions.pop(node, None)
        reset = getattr(self.channel, "reset", None)
        if reset is not None:
            reset(node)
        self._handshake(node)

    def _await_bare(self, node: int, kind: str, seq: int) -> Envelope:
        env = self._await(lambda e: e.sender == f"n:{node}" and e.body.get("re") == seq
                          and e.kind in (kind, "REPLY"))
        if not env.body.get("ok", False):
            raise _error_class(env.body.get("error", ""))(env.body.get("detail", ""))
        return env

    def _handshake(self, node: int) -> None:
        hs_rng = self.rng.split(f"hs-{node}-{self._seq.next('hs')}")
        nonce = hs_rng.hex(16)
        eph = X25519PrivateKey.from_private_bytes(hs_rng.bytes(32))
        eph_pub = eph.public_key().public_bytes_raw().hex()
        hello = Envelope("", self._seq.next("auth"), self.identity, f"n:{node}",
                         "AUTH_HELLO", {"id": self.identity, "nonce": nonce, "eph": eph_pub})
        self.channel.send(hello)
        challenge = self._await_bare(node, "AUTH_CHALLENGE", hello.seq)
        node_nonce, node_eph = challenge.body["nonce"], challenge.body["eph"]
        transcript = canonical({"cn": nonce, "nn": node_nonce, "ce": eph_pub,
                                "ne": node_eph, "node": node})
        try:
            self.deployment.node_pub(node).verify(
                bytes.fromhex(challenge.body["sig"]), transcript)
        except (InvalidSignature, ValueError) as exc:
            raise BadChallengeResponse(f"node {node} failed to prove its identity") from exc
        response_transcript = canonical({"nn": node_nonce, "cn": nonce, "ce": eph_pub,
                                         "ne": node_eph, "id": self.identity})
        response = Envelope("", self._seq.next("auth"), self.identity, f"n:{node}",
                            "AUTH_RESPONSE", {"id": self.identity, "nonce": node_nonce,
                                              "sig": self.sign_key.sign(response_transcript).hex()})
        self.channel.send(response)
        ok = self._await_bare(node, "AUTH_OK", response.seq)
        shared = eph.exchange(X25519PublicKey.from_public_bytes(bytes.fromhex(node_eph)))
        key = hkdf(shared, salt=bytes.fromhex(nonce) + bytes.fromhex(node_nonce),
                   info=b"qv-session-v1")
        ok.verify_mac(key)  # key confirmation: the node derived the same secret
        self.sessions[node] = NodeSession(node, ok.body["session"], key)
        secure = getattr(self.channel, "secure", None)
        if secure is not None:
            secure(node, key)  # stream encryption from here on (socket binding)

    # -- request/reply ----------------------------------------------------------------

    def _send_request(self, node: int, kind: str, body: dict) -> int:
        if node not in self.sessions:
            raise NodeUnreachable(f"no session with node {node}; connect first")
        session = self.sessions[node]
        seq = self._seq.next(session.session_id)
        env = Envelope(session.session_id, seq, self.identity, f"n:{node}",
                       kind, body).with_mac(session.key)
        self.channel.send(env)
        return seq

    def _await_reply(self, node: int, seq: int, tries: int = 50) -> dict:
        session = self.sessions[node]
        env = self._await(lambda e: e.kind == "REPLY" and e.session == session.session_id
                          and e.body.get("re") == seq, tries)
        env.verify_mac(session.key)
        if not env.body["ok"]:
            raise _error_class(env.body["error"])(env.body.get("detail", ""))
        return env.body["data"]

    def request(self, node: int, kind: str, body: dict) -> dict:
        return self._await_reply(node, self._send_request(node, kind, body))

    def request_many(self, kind: str, body_for, nodes: tuple[int, ...] = ALL_NODES) -> dict:
        """Fan out, gather per-node results; exceptions are collected, not raised."""
        seqs = {}
        for node in nodes:
            if node not in self.sessions:
                continue
            body = body_for(node) if callable(body_for) else body_for
            seqs[node] = self._send_request(node, kind, body)
        results: dict[int, object] = {}
        for node, seq in seqs.items():
            try:
                results[node] = self._await_reply(node, seq)
            except QuorumVaultError as exc:
                results[node] = exc
        return results

    def request_all_ok(self, kind: str, body_for, nodes: tuple[int, ...] = ALL_NODES) -> dict:
        results = self.request_many(kind, body_for, nodes)
        for node, result in sorted(results.items()):
            if isinstance(result, Exception):
                raise result
        return results

    # -- share plumbing -----------------------------------------------------------------

    def _share_bytes(self, data: bytes, k: int, label: str) -> list[list[str]]:
        """Chunk bytes into field elements and share each; [node-1][chunk]."""
        chunks = bytes_to_elements(data, self.field)
        per_node: list[list[str]] = [[] for _ in range(NODE_COUNT)]
        rng = self.rng.split(label)
        for idx, chunk in enumerate(chunks):
            shares, _ = share(self.field, chunk, k, NODE_COUNT, rng.split(f"c{idx}"))
            for s in shares:
                per_node[s.index - 1].append(str(s.value))
        return per_node

    def _reconstruct_chunks(self, per_node: dict[int, list[str]], k: int, length: int) -> bytes:
        chunk_count = len(next(iter(per_node.values())))
        secrets = []
        for idx in range(chunk_count):
            shares = [Share(node, int(vals[idx])) for node, vals in sorted(per_node.items())]
            secrets.append(reconstruct(self.field, shares, k))
        return elements_to_bytes(secrets, length)

    def _fresh_id(self, prefix: str) -> str:
        return f"{prefix}-{self.rng.split(f'id-{prefix}-{self._seq.next(prefix)}').hex(8)}"

    # -- secure notes ----------------------------------------------------------------------

    def note_create(self, text: str, threshold: str | int = "majority",
                    note_id: str | None = None, codec: str = "zlib") -> str:
        raw = text.encode()
        if len(raw) > NOTE_CAP:
            raise NoteTooLarge(f"{len(raw)} bytes > {NOTE_CAP}")
        k = resolve_threshold(threshold)
        note_id = note_id or self._fresh_id("note")
        key = random_key(self.rng.split(f"notekey-{note_id}"))
        ciphertext = aead_encrypt(key, compress(raw, codec), self.rng.split(f"nonce-{note_id}"))
        per_node = self._share_bytes(key, k, f"noteshare-{note_id}")
        self.request_all_ok("NOTE_PUT", lambda node: {
            "note_id": note_id, "threshold": k, "ciphertext": ciphertext.hex(),
            "codec": codec, "chunks": per_node[node - 1]})
        return note_id

    def note_read(self, note_id: str) -> str:
        results = self.request_many("NOTE_GET", {"note_id": note_id})
        good = {n: r for n, r in results.items() if not isinstance(r, Exception)}
        if not good:
            raise next(iter(results.values()))
        threshold = max(r["threshold"] for r in good.values())
        if len(good) < threshold:
            raise NodeUnreachable(f"only {len(good)} nodes served shares, need {threshold}")
        # replica check: majority hash, then verify the bytes we actually use
        hashes = sorted(r["hash"] for r in good.values())
        majority_hash = max(set(hashes), key=hashes.count)
        if hashes.count(majority_hash) < MAJORITY:
            raise ReplicaMismatch("no majority ciphertext replica")
        source = next(data for _, data in sorted(good.items()) if data["hash"] == majority_hash)
        ciphertext = bytes.fromhex(source["ciphertext"])
        if sha256_hex(ciphertext) != majority_hash:
            raise ReplicaMismatch("replica bytes do not match the majority hash")
        key = self._reconstruct_chunks({n: r["chunks"] for n, r in good.items()},
                                       threshold, KEY_BYTES)
        return decompress(aead_decrypt(key, ciphertext), source["codec"]).decode()

    def note_update(self, note_id: str, text: str) -> None:
        raw = text.encode()
        if len(raw) > NOTE_CAP:
            raise NoteTooLarge(f"{len(raw)} bytes > {NOTE_CAP}")
        current = self.request(1, "NOTE_GET", {"note_id": note_id})
        k = current["threshold"]
        key = random_key(self.rng.split(f"notekey2-{note_id}-{self._seq.next('nk')}"))
        ciphertext = aead_encrypt(key, compress(raw), self.rng.split(f"nonce2-{note_id}"))
        per_node = self._share_bytes(key, k, f"noteshare2-{note_id}-{self._seq.next('ns')}")
        self.request_all_ok("NOTE_PUT", lambda node: {
            "note_id": note_id, "threshold": k, "ciphertext": ciphertext.hex(),
            "codec": "zlib", "chunks": per_node[node - 1]})

    # -- escrowed file keys ---------------------------------------------------------------------

    def key_escrow(self, key: bytes, threshold: str | int = "majority", label: str = "") -> str:
        if len(key) != KEY_BYTES:
            raise BadKeyLength(f"escrowed keys are {KEY_BYTES} bytes, got {len(key)}")
        k = resolve_threshold(threshold)
        key_id = self._fresh_id("key")
        per_node = self._share_bytes(key, k, f"escrow-{key_id}")
        self.request_all_ok("KEY_ESCROW", lambda node: {
            "key_id": key_id, "threshold": k, "chunks": per_node[node - 1], "label": label})
        return key_id

    def key_retrieve(self, key_id: str) -> bytes:
        results = self.request_many("KEY_RETRIEVE", {"key_id": key_id})
        good = {n: r for n, r in results.items() if not isinstance(r, Exception)}
        if not good:
            raise next(iter(results.values()))
        threshold = max(r["threshold"] for r in good.values())
        if len(good) < threshold:
            raise NodeUnreachable(f"only {len(good)} shares served, need {threshold}")
        return self._reconstruct_chunks({n: r["chunks"] for n, r in good.items()},
                                        threshold, KEY_BYTES)

    def encrypt_with_escrowed(self, key_id: str, blob: bytes) -> bytes:
        """Online helper: applies the retrieved key without persisting either."""
        return aead_encrypt(self.key_retrieve(key_id), blob,
                            self.rng.split(f"enc-{key_id}-{self._seq.next('eh')}"))

    def decrypt_with_escrowed(self, key_id: str, blob: bytes) -> bytes:
        return aead_decrypt(self.key_retrieve(key_id), blob)

    # -- private email ------------------------------------------------------------------------------

    def registry_get(self, user: str) -> dict:
        results = self.request_many("REGISTRY_GET", {"user": user})
        entries = [canonical(r) for r in results.values() if not isinstance(r, Exception)]
        if not entries:
            raise next(iter(results.values()))
        best = max(set(entries), key=entries.count)
        if entries.count(best) < MAJORITY:
            raise RegistryInconsistent(f"no majority registry entry for {user!r}")
        return json.loads(best)

    def email_send(self, recipient_user: str, body: str) -> str:
        raw = body.encode()
        if len(raw) > EMAIL_CAP:
            raise NoteTooLarge(f"email body {len(raw)} bytes > {EMAIL_CAP}")
        entry = self.registry_get(recipient_user)
        sealed = seal(bytes.fromhex(entry["enc_pk"]), raw,
                      self.rng.split(f"seal-{self._seq.next('em')}"))
        email_id = self._fresh_id("mail")
        per_node = self._share_bytes(sealed, MAJORITY, f"mailshare-{email_id}")
        self.request_all_ok("EMAIL_PUT", lambda node: {
            "email_id": email_id, "recipient": f"u:{recipient_user}",
            "chunks": per_node[node - 1], "length": len(sealed)})
        return email_id

    def email_fetch(self) -> list[dict]:
        if self.enc_key is None:
            raise BadKeyLength("this identity has no decryption key")
        listings = self.request_many("EMAIL_LIST", {})
        inbox: dict[str, dict] = {}
        for result in listings.values():
            if isinstance(result, Exception):
                continue
            for entry in result["inbox"]:
                inbox[entry["email_id"]] = entry
        out = []
        for email_id, entry in sorted(inbox.items()):
            results = self.request_many("EMAIL_GET", {"email_id": email_id})
            good = {n: r for n, r in results.items() if not isinstance(r, Exception)}
            if len(good) < MAJORITY:
                raise NodeUnreachable(f"only {len(good)} share streams for {email_id}")
            sealed = self._reconstruct_chunks({n: r["chunks"] for n, r in good.items()},
                                              MAJORITY, entry["length"])
            out.append({"email_id": email_id, "sender": entry["sender"],
                        "body": unseal(self.enc_key, sealed).decode()})
        return out

    # -- governance --------------------------------------------------------------------------------------

    def propose(self, action: Action | str, target: str, new_threshold: int = 0) -> str:
        action = Action(action)
        created_at = self._seq.next("clock")
        proposal_id = sha256_hex(canonical({
            "action": action.value, "target": target, "by": self.identity,
            "at": created_at}))[:16]
        proposal = Proposal(proposal_id, action, target, self.identity, created_at,
                            new_threshold)
        self.request_all_ok("PROPOSE", {"proposal": proposal.to_wire()})
        return proposal_id

    def vote(self, proposal_id: str, approve: bool = True) -> dict | None:
        if not self.identity.startswith("i:"):
            raise errors.NotAuthorized("only institution operators vote")
        institution = int(self.identity[2:])
        vote = Vote(proposal_id, institution, "approve" if approve else "reject")
        vote = vote.signed(self.sign_key)
        results = self.request_all_ok("VOTE", {"vote": vote.to_wire()})
        decisions = [r["decision"] for r in results.values() if r["decision"]]
        return decisions[0] if decisions else None

    def gov_status(self, proposal_id: str, node: int = 1) -> dict:
        return self.request(node, "GOV_STATUS", {"proposal_id": proposal_id})

    # -- surveys --------------------------------------------------------------------------------------------

    def survey_create(self, schema: dict, threshold: int, min_respondents: int,
                      queries: list[dict], survey_id: str | None = None) -> dict:
        survey_id = survey_id or self._fresh_id("survey")
        self.request_all_ok("SURVEY_CREATE", {
            "survey_id": survey_id, "schema": schema, "threshold": threshold,
            "min_respondents": min_respondents, "queries": queries})
        return {"survey_id": survey_id, "policy_id": f"pol:{survey_id}"}

    def survey_respond(self, survey_id: str, schema: dict, answers: dict) -> None:
        """Dual-encode and share the answers, then drive the joint check."""
        from ..services.survey import validate_answers

        validate_answers(schema, answers)
        rng = self.rng.split(f"resp-{survey_id}")
        per_node_attrs: dict[int, dict] = {node: {} for node in ALL_NODES}
        for attr in sorted(schema):
            width = attr_width(schema, attr)
            value = answers[attr]
            bit_vals = bits_of(value, width)
            bit_shares = []
            for i, bit in enumerate(bit_vals):
                shares, _ = share(self.field, bit, MAJORITY, NODE_COUNT,
                                  rng.split(f"{attr}-b{i}"))
                bit_shares.append(shares)
            int_shares = None
            if schema[attr]["type"] != "bool":
                int_shares, _ = share(self.field, value, MAJORITY, NODE_COUNT,
                                      rng.split(f"{attr}-int"))
            for node in ALL_NODES:
                enc = {"bits": [str(bs[node - 1].value) for bs in bit_shares]}
                if int_shares is not None:
                    enc["int"] = str(int_shares[node - 1].value)
                per_node_attrs[node][attr] = enc
        self.request_all_ok("SURVEY_RESPOND", lambda node: {
            "survey_id": survey_id, "attrs": per_node_attrs[node]})
        self.request_all_ok("SURVEY_CHECK", {"survey_id": survey_id})

    def survey_compute(self, survey_id: str, query_id: str, decision: str | None = None) -> dict:
        body = {"survey_id": survey_id, "query_id": query_id}
        if decision:
            body["decision"] = decision
        results = self.request_all_ok("SURVEY_COMPUTE", body)
        values = {canonical(r) for r in results.values()}
        if len(values) != 1:
            raise errors.OpenFailed("nodes published diverging statistics")
        return next(iter(results.values()))

    def survey_results(self, survey_id: str, node: int = 1) -> list[dict]:
        return self.request(node, "SURVEY_RESULTS", {"survey_id": survey_id})["results"]

    def survey_info(self, survey_id: str) -> dict:
        """Majority-consistent view of the public survey metadata."""
        results = self.request_many("SURVEY_INFO", {"survey_id": survey_id})
        docs = [canonical(r) for r in results.values() if not isinstance(r, Exception)]
        if not docs:
            raise next(iter(results.values()))
        best = max(set(docs), key=docs.count)
        if docs.count(best) < MAJORITY:
            raise RegistryInconsistent(f"no majority survey metadata for {survey_id!r}")
        return json.loads(best)

    # -- admin --------------------------------------------------------------------------------------------------

    def register_user(self, user: str, sign_pk: str, enc_pk: str) -> None:
        self.request_all_ok("REGISTER_USER", {"user": user, "sign_pk": sign_pk,
                                              "enc_pk": enc_pk})

    def erase(self, record_id: str, decision: str | None = None,
              nodes: tuple[int, ...] = ALL_NODES) -> dict:
        body = {"record_id": record_id}
        if decision:
            body["decision"] = decision
        return self.request_many("ERASE", body, nodes)

    def fetch(self, record_id: str, decision: str | None = None, node: int = 1) -> dict:
        body = {"record_id": record_id}
        if decision:
            body["decision"] = decision
        return self.request(node, "FETCH", body)

    def replica_check(self, record_id: str) -> tuple[bool, list[int]]:
        results = self.request_many("REPLICA_HASH", {"record_id": record_id})
        good = {n: r["hash"] for n, r in results.items() if not isinstance(r, Exception)}
        if len(good) < MAJORITY:
            raise QuorumUnreachable(f"only {len(good)} replicas reachable")
        hashes = sorted(good.values())
        majority_hash = max(set(hashes), key=hashes.count)
        if hashes.count(majority_hash) < MAJORITY:
            return False, sorted(good)
        flagged = sorted(n for n, h in good.items() if h != majority_hash)
        return True, flagged

    def recover(self, record_id: str, lost: int, threshold: int) -> dict:
        body = {"record_id": record_id, "lost": lost, "threshold": threshold}
        results = self.request_all_ok("RECOVER_INIT", body)
        return results[lost]
