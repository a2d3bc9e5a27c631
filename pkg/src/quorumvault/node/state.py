"""The institution node: one state machine behind every transport binding.

handle(envelope) -> outgoing envelopes. The socket server, the HTTP gateway,
and the in-process harness all feed this same object, so what the tests
exercise is what deployments run. Envelopes are processed atomically and in
arrival order; handlers never wait for remote replies (multi-party protocols
advance message by message through buffered session state).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Callable

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PublicKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey

from ..errors import (
    AlreadyResponded,
    BadChallengeResponse,
    BadSchema,
    BadSignature,
    ConsistencyFailure,
    NotAuthorized,
    NotFound,
    NotOwner,
    QuorumVaultError,
    ReplayedNonce,
    Restricted,
    SchemaMismatch,
    SessionLimit,
    TooFewRespondents,
    UndeclaredQuery,
    UnknownIdentity,
    UnknownKind,
)
from ..fields import Field
from ..governance import (
    MAJORITY,
    NODE_COUNT,
    AccessPolicy,
    Action,
    Decision,
    GovernanceLog,
    PolicyKind,
    Proposal,
    Vote,
    canonical,
)
from ..mpc.circuits import MUL as GATE_MUL, OPEN as GATE_OPEN, RAND as GATE_RAND, compile_predicate
from ..mpc.engine import GateMsg, NodeEngine
from ..services.crypto import hkdf
from ..services.survey import StatQuery, attr_width, format_percentage, validate_schema
from ..shamir import Share, combine_subshares, lagrange_coeffs, reshare_subshares
from ..wire import Envelope, SeqSource, SeqTracker
from .config import NodeConfig
from .sessions import build_compute_program, build_consistency_program, response_input_shares
from .storage import NodeStore, StoredRecord

MAX_SESSIONS = 64

UNAUTHENTICATED_KINDS = {"AUTH_HELLO", "AUTH_RESPONSE", "PARAMS_GET"}
PEER_KINDS = {"MUL_RESHARE", "OPEN_CONTRIB", "RAND_CONTRIB", "RESHARE_SUB",
              "RECOVER_MASK", "RECOVER_CONTRIB"}
GATE_ENVELOPE_KIND = {GATE_MUL: "MUL_RESHARE", GATE_RAND: "RAND_CONTRIB",
                      GATE_OPEN: "OPEN_CONTRIB"}


class _ChannelReject(QuorumVaultError):
    """Envelope failed MAC or sequence checks; dropped, never answered."""


@dataclass
class ClientSession:
    session_id: str
    identity: str
    key: bytes


@dataclass
class MpcContext:
    sid: str
    engine: NodeEngine
    on_complete: Callable[["NodeState", NodeEngine], list[Envelope]]


@dataclass
class RecoverContext:
    sid: str
    record_id: str
    lost: int
    helpers: tuple[int, ...]
    threshold: int
    reply_to: tuple[str, str, int] | None = None   # identity, session, seq
    masks_out: dict[int, list[int]] = dc_field(default_factory=dict)
    masks_in: dict[int, list[int]] = dc_field(default_factory=dict)
    contribs: dict[int, dict] = dc_field(default_factory=dict)
    sent: bool = False


@dataclass
class ReshareContext:
    sid: str
    policy_id: str
    old_k: int
    new_k: int
    record_ids: tuple[str, ...]
    subs: dict[str, dict[int, list[int]]] = dc_field(default_factory=dict)
    done: bool = False


class NodeState:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.index = config.index
        self.field: Field = config.deployment.field_params().field()
        self.store = NodeStore(config.data_dir)
        self.gov = GovernanceLog({i: config.deployment.node_pub(i)
                                  for i in range(1, NODE_COUNT + 1)})
        self.registry: dict[str, dict] = {}
        self.surveys: dict[str, dict] = {}
        self.clock = 0
        self.incarnation = self._bump_incarnation()
        self.rng = config.rng().split(f"inc-{self.incarnation}")
        self.sessions: dict[str, ClientSession] = {}
        self._session_counter = 0
        self._pending_nonces: dict[str, dict] = {}
        self._seq_in = SeqTracker()
        self._seq_out = SeqSource()
        self.mpc: dict[str, MpcContext] = {}
        self.parked: dict[str, list[GateMsg]] = {}
        self.recover: dict[str, RecoverContext] = {}
        self._recover_done: set[str] = set()
        self.reshares: dict[str, ReshareContext] = {}
        self._parked_reshare: dict[str, list[tuple[int, dict]]] = {}
        self.error_log: list[str] = []
        self._load_persisted()
        for user, entry in sorted(config.bootstrap_registry.items()):
            if user not in self.registry:
                self._register(user, entry["sign_pk"], entry["enc_pk"])

    # -- persistence -------------------------------------------------------

    def _bump_incarnation(self) -> int:
        meta = Path(self.config.data_dir) / "meta.json"
        meta.parent.mkdir(parents=True, exist_ok=True)
        n = 0
        if meta.exists():
            n = json.loads(meta.read_text()).get("incarnation", 0)
        meta.write_text(json.dumps({"incarnation": n + 1}))
        return n + 1

    def _load_persisted(self) -> None:
        for rec in self.store.by_kind("registry_entry"):
            if rec.record_id.startswith("reg:"):
                self.registry[rec.record_id[4:]] = rec.payload
            elif rec.record_id.startswith("polrec:"):
                policy = AccessPolicy.from_wire(rec.payload["policy"])
                self.gov.add_policy(policy)
                if rec.payload.get("restricted"):
                    self.gov.restricted.add(policy.policy_id)
            elif rec.record_id.startswith("survey:"):
                self.surveys[rec.payload["survey_id"]] = rec.payload
        for entry in self.store.decisions():
            proposal = Proposal.from_wire(entry["proposal"])
            self.gov.proposals[proposal.proposal_id] = proposal
            self.gov.decisions[proposal.proposal_id] = Decision.from_wire(entry["decision"])

    def _persist_policy(self, policy: AccessPolicy) -> None:
        self.gov.add_policy(policy)
        self.store.put(StoredRecord(f"polrec:{policy.policy_id}", "registry_entry",
                                    policy.policy_id,
                                    {"policy": policy.to_wire(),
                                     "restricted": policy.policy_id in self.gov.restricted}))

    def _persist_survey(self, survey: dict) -> None:
        self.surveys[survey["survey_id"]] = survey
        self.store.put(StoredRecord(f"survey:{survey['survey_id']}", "registry_entry",
                                    survey["policy_id"], survey))

    def _register(self, user: str, sign_pk: str, enc_pk: str) -> None:
        entry = {"sign_pk": sign_pk, "enc_pk": enc_pk}
        self.registry[user] = entry
        self.store.put(StoredRecord(f"reg:{user}", "registry_entry", "pol:registry", entry))

    # -- envelope intake -----------------------------------------------------

    def handle(self, env: Envelope) -> list[Envelope]:
        self.clock += 1
        if env.recipient != f"n:{self.index}":
            return []
        try:
            return self._dispatch(env)
        except _ChannelReject as exc:
            # tampering or replay: no state change, no reply, just the log
            self.error_log.append(f"{env.kind}: {exc}")
            return []
        except QuorumVaultError as exc:
            if env.kind in PEER_KINDS or env.kind in UNAUTHENTICATED_KINDS:
                self.error_log.append(f"{env.kind}: {type(exc).__name__}: {exc}")
                if env.kind in UNAUTHENTICATED_KINDS:
                    return [self._bare_reply(env, error=exc)]
                return []
            session = self.sessions.get(env.session)
            if session is not None:
                return [self._reply(env, error=exc)]
            self.error_log.append(f"{env.kind}: {type(exc).__name__}: {exc}")
            return []

    def _check_channel(self, env: Envelope, key: bytes) -> None:
        try:
            env.verify_mac(key)
            self._seq_in.check(env)
        except QuorumVaultError as exc:
            raise _ChannelReject(f"{type(exc).__name__}: {exc}") from exc

    def _dispatch(self, env: Envelope) -> list[Envelope]:
        if env.kind in UNAUTHENTICATED_KINDS:
            handler = getattr(self, f"_on_{env.kind.lower()}")
            return handler(env)
        if env.kind in PEER_KINDS:
            peer = self._peer_index(env)
            self._check_channel(env, self.config.link_mac_key(peer))
            handler = getattr(self, f"_on_{env.kind.lower()}")
            return handler(env, peer)
        session = self.sessions.get(env.session)
        if session is None or env.sender != session.identity:
            raise _ChannelReject(f"no session {env.session!r} for {env.sender!r}")
        self._check_channel(env, session.key)
        handler = getattr(self, f"_on_{env.kind.lower()}", None)
        if handler is None:
            raise UnknownKind(env.kind)
        return handler(env, session)

    def _peer_index(self, env: Envelope) -> int:
        if not env.sender.startswith("n:"):
            raise UnknownIdentity(f"peer envelope from {env.sender!r}")
        peer = int(env.sender[2:])
        if not 1 <= peer <= NODE_COUNT or peer == self.index:
            raise UnknownIdentity(f"bad peer index {peer}")
        return peer

    # -- outgoing helpers ------------------------------------------------------

    def _reply(self, request: Envelope, data: dict | None = None,
               error: QuorumVaultError | None = None) -> Envelope:
        session = self.sessions[request.session]
        body = {"re": request.seq, "ok": error is None}
        if error is None:
            body["data"] = data or {}
        else:
            body["error"] = type(error).__name__
            body["detail"] = str(error)
        env = Envelope(request.session, self._seq_out.next(request.session),
                       f"n:{self.index}", request.sender, "REPLY", body)
        return env.with_mac(session.key)

    def _bare_reply(self, request: Envelope, data: dict | None = None, kind: str = "REPLY",
                    error: QuorumVaultError | None = None) -> Envelope:
        body = {"re": request.seq, "ok": error is None}
        if error is None:
            body.update(data or {})
        else:
            body["error"] = type(error).__name__
            body["detail"] = str(error)
        return Envelope("", 0, f"n:{self.index}", request.sender, kind, body)

    def _session_reply(self, identity: str, session_id: str, re_seq: int,
                       data: dict | None = None,
                       error: QuorumVaultError | None = None) -> Envelope:
        body = {"re": re_seq, "ok": error is None}
        if error is None:
            body["data"] = data or {}
        else:
            body["error"] = type(error).__name__
            body["detail"] = str(error)
        env = Envelope(session_id, self._seq_out.next(session_id),
                       f"n:{self.index}", identity, "REPLY", body)
        return env.with_mac(self.sessions[session_id].key)

    def _peer_envelope(self, dest: int, kind: str, body: dict) -> Envelope:
        session = f"p{self.index}-{self.incarnation}"
        env = Envelope(session, self._seq_out.next(session), f"n:{self.index}",
                       f"n:{dest}", kind, body)
        return env.with_mac(self.config.link_mac_key(dest))

    # -- authentication ----------------------------------------------------------

    def _identity_sign_pk(self, identity: str) -> bytes:
        if identity.startswith("i:"):
            idx = int(identity[2:])
            if not 1 <= idx <= NODE_COUNT:
                raise UnknownIdentity(identity)
            return bytes.fromhex(self.config.deployment.node_sign_pks[idx])
        if identity.startswith("u:"):
            entry = self.registry.get(identity[2:])
            if entry is None:
                raise UnknownIdentity(identity)
            return bytes.fromhex(entry["sign_pk"])
        raise UnknownIdentity(identity)

    def _on_auth_hello(self, env: Envelope) -> list[Envelope]:
        identity = env.body["id"]
        self._identity_sign_pk(identity)  # raises UnknownIdentity early
        client_nonce = env.body["nonce"]
        client_eph = env.body["eph"]
        node_nonce = self.rng.split(f"nonce-{self.clock}").hex(16)
        eph_priv = X25519PrivateKey.from_private_bytes(
            self.rng.split(f"eph-{self.clock}").bytes(32))
        node_eph = eph_priv.public_key().public_bytes_raw().hex()
        transcript = canonical({"cn": client_nonce, "nn": node_nonce,
                                "ce": client_eph, "ne": node_eph, "node": self.index})
        sig = self.config.sign_key.sign(transcript).hex()
        self._pending_nonces[node_nonce] = {
            "identity": identity, "client_nonce": client_nonce,
            "client_eph": client_eph, "node_eph": node_eph,
            "eph_priv": eph_priv,
        }
        return [self._bare_reply(env, kind="AUTH_CHALLENGE",
                                 data={"nonce": node_nonce, "eph": node_eph, "sig": sig})]

    def _on_auth_response(self, env: Envelope) -> list[Envelope]:
        node_nonce = env.body["nonce"]
        pending = self._pending_nonces.pop(node_nonce, None)
        if pending is None:
            raise ReplayedNonce(f"nonce {node_nonce[:8]}... unknown or already used")
        identity = env.body["id"]
        if identity != pending["identity"]:
            raise BadChallengeResponse("identity changed between hello and response")
        transcript = canonical({"nn": node_nonce, "cn": pending["client_nonce"],
                                "ce": pending["client_eph"], "ne": pending["node_eph"],
                                "id": identity})
        try:
            Ed25519PublicKey.from_public_bytes(self._identity_sign_pk(identity)).verify(
                bytes.fromhex(env.body["sig"]), transcript)
        except (InvalidSignature, ValueError) as exc:
            raise BadChallengeResponse("signature over challenge failed") from exc
        shared = pending["eph_priv"].exchange(
            X25519PublicKey.from_public_bytes(bytes.fromhex(pending["client_eph"])))
        key = hkdf(shared, salt=bytes.fromhex(pending["client_nonce"]) + bytes.fromhex(node_nonce),
                   info=b"qv-session-v1")
        self._session_counter += 1
        session_id = f"c{self.index}-{self._session_counter}"
        self.sessions[session_id] = ClientSession(session_id, identity, key)
        ok = Envelope("", 0, f"n:{self.index}", identity, "AUTH_OK",
                      {"re": env.seq, "ok": True, "session": session_id})
        return [ok.with_mac(key)]

    def _on_params_get(self, env: Envelope) -> list[Envelope]:
        return [self._bare_reply(env, data={
            "p": str(self.field.p), "n": NODE_COUNT, "majority": MAJORITY,
            "node": self.index})]

    # -- registry -----------------------------------------------------------------

    def _require_institution(self, session: ClientSession) -> int:
        if not session.identity.startswith("i:"):
            raise NotAuthorized("institution operators only")
        return int(session.identity[2:])

    def _on_register_user(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        self._require_institution(session)
        user = env.body["user"]
        self._register(user, env.body["sign_pk"], env.body["enc_pk"])
        return [self._reply(env, {"user": user})]

    def _on_registry_get(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        user = env.body["user"]
        entry = self.registry.get(user)
        if entry is None:
            raise NotFound(f"user {user!r} not registered")
        return [self._reply(env, {"user": user, **entry})]

    # -- records: shared helpers ---------------------------------------------------

    def _policy_for(self, record: StoredRecord) -> AccessPolicy:
        policy = self.gov.policies.get(record.policy_id)
        if policy is None:
            raise NotFound(f"policy {record.policy_id!r}")
        return policy

    def _owner_access(self, record: StoredRecord, session: ClientSession) -> None:
        if record.payload.get("owner") != session.identity:
            raise NotOwner(f"{session.identity} does not own {record.record_id}")
        if record.policy_id in self.gov.restricted:
            raise Restricted(record.policy_id)

    def _authorize_fetch(self, record: StoredRecord, session: ClientSession,
                         decision_id: str | None) -> None:
        if record.policy_id in self.gov.restricted:
            raise Restricted(record.policy_id)
        if record.payload.get("owner") == session.identity:
            return
        if decision_id and self.gov.decision_covers(decision_id, Action.REVEAL, record.policy_id):
            return
        raise NotAuthorized(f"no ownership or reveal decision for {record.record_id}")

    def _new_user_policy(self, policy_id: str, threshold: int, owner: str,
                         kind: PolicyKind = PolicyKind.USER_ITEM) -> AccessPolicy:
        policy = AccessPolicy(policy_id, threshold, owner, kind)
        self._persist_policy(policy)
        return policy

    # -- secure notes -----------------------------------------------------------

    def _on_note_put(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        body = env.body
        note_id = body["note_id"]
        existing = self.store.records.get(note_id)
        if existing is not None:
            self._owner_access(existing, session)
            # true erasure of the superseded key shares before the new write
            self.store.erase(note_id)
            if self.store.exists(f"blob:{note_id}"):
                self.store.erase(f"blob:{note_id}")
        else:
            self._new_user_policy(f"pol:{note_id}", int(body["threshold"]), session.identity)
        ciphertext = bytes.fromhex(body["ciphertext"])
        digest = self.store.put_blob(f"blob:{note_id}", ciphertext)
        self.store.put(StoredRecord(f"blob:{note_id}", "blob", f"pol:{note_id}", {
            "owner": session.identity}, digest))
        self.store.put(StoredRecord(note_id, "key_share", f"pol:{note_id}", {
            "owner": session.identity, "codec": body.get("codec", "zlib"),
            "chunks": list(body["chunks"]), "blob": f"blob:{note_id}"}))
        return [self._reply(env, {"note_id": note_id, "hash": digest})]

    def _on_note_get(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["note_id"])
        self._owner_access(record, session)
        blob_rec = self.store.get(record.payload["blob"])
        ciphertext = self.store.get_blob(record.payload["blob"])
        return [self._reply(env, {
            "ciphertext": ciphertext.hex(), "codec": record.payload["codec"],
            "chunks": record.payload["chunks"], "hash": blob_rec.consistency_hash,
            "threshold": self._policy_for(record).reveal_threshold})]

    # -- escrowed keys ------------------------------------------------------------

    def _on_key_escrow(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        key_id = env.body["key_id"]
        if self.store.exists(key_id):
            raise NotAuthorized(f"key id {key_id!r} already exists")
        self._new_user_policy(f"pol:{key_id}", int(env.body["threshold"]), session.identity)
        self.store.put(StoredRecord(key_id, "key_share", f"pol:{key_id}", {
            "owner": session.identity, "chunks": list(env.body["chunks"]),
            "label": env.body.get("label", "")}))
        return [self._reply(env, {"key_id": key_id})]

    def _on_key_retrieve(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["key_id"])
        self._owner_access(record, session)
        return [self._reply(env, {"chunks": record.payload["chunks"],
                                  "label": record.payload.get("label", ""),
                                  "threshold": self._policy_for(record).reveal_threshold})]

    # -- private email -------------------------------------------------------------

    def _on_email_put(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        recipient = env.body["recipient"]
        if recipient[2:] not in self.registry:
            raise NotFound(f"recipient {recipient!r} not registered")
        email_id = env.body["email_id"]
        if self.store.exists(email_id):
            raise NotAuthorized(f"email id {email_id!r} already exists")
        self._new_user_policy(f"pol:{email_id}", MAJORITY, recipient)
        self.store.put(StoredRecord(email_id, "email_share", f"pol:{email_id}", {
            "owner": recipient, "sender": session.identity,
            "chunks": list(env.body["chunks"]), "length": int(env.body["length"])}))
        return [self._reply(env, {"email_id": email_id})]

    def _on_email_list(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        inbox = [{"email_id": r.record_id, "sender": r.payload["sender"],
                  "length": r.payload["length"]}
                 for r in self.store.by_kind("email_share")
                 if r.payload["owner"] == session.identity]
        return [self._reply(env, {"inbox": inbox})]

    def _on_email_get(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["email_id"])
        if record.payload["owner"] != session.identity:
            raise NotOwner("only the recipient may collect email shares")
        if record.policy_id in self.gov.restricted:
            raise Restricted(record.policy_id)
        return [self._reply(env, {"chunks": record.payload["chunks"],
                                  "length": record.payload["length"],
                                  "sender": record.payload["sender"]})]

    # -- generic fetch / erase / replica --------------------------------------------

    def _on_fetch(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["record_id"])
        self._authorize_fetch(record, session, env.body.get("decision"))
        return [self._reply(env, {"record": record.to_wire()})]

    def _on_erase(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["record_id"])
        decision_id = env.body.get("decision")
        if record.payload.get("owner") != session.identity:
            if not (decision_id and self.gov.decision_covers(
                    decision_id, Action.DISCARD, record.policy_id)):
                raise NotAuthorized("erase needs ownership or a discard decision")
        self.store.erase(record.record_id)
        blob_id = record.payload.get("blob")
        if blob_id and self.store.exists(blob_id):
            self.store.erase(blob_id)
        return [self._reply(env, {"erased": record.record_id})]

    def _on_replica_hash(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record = self.store.get(env.body["record_id"])
        return [self._reply(env, {"record_id": record.record_id,
                                  "hash": record.consistency_hash})]

    # -- governance ------------------------------------------------------------------

    def _on_propose(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        proposal = Proposal.from_wire(env.body["proposal"])
        policy = self.gov.policies.get(proposal.target)
        if policy is None:
            raise NotFound(f"no such target {proposal.target!r}")
        is_institution = session.identity.startswith("i:")
        if not is_institution and policy.owner != session.identity:
            raise NotAuthorized("proposals come from institutions or the owner")
        if proposal.action == Action.RETHRESHOLD and policy.kind == PolicyKind.SURVEY:
            raise NotAuthorized("survey thresholds are fixed at creation")
        self.gov.open_proposal(proposal)
        return [self._reply(env, {"proposal_id": proposal.proposal_id})]

    def _on_vote(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        vote = Vote.from_wire(env.body["vote"])
        idx = self._require_institution(session)
        if vote.institution != idx:
            raise BadSignature(f"operator i:{idx} cannot cast a vote for {vote.institution}")
        proposal = self.gov.proposals.get(vote.proposal_id)
        if proposal is None:
            raise NotFound(f"no such proposal {vote.proposal_id!r}")
        old_threshold = self.gov.policies[proposal.target].reveal_threshold
        decision = self.gov.add_vote(vote)
        out = [self._reply(env, {"decision": decision.to_wire() if decision else None})]
        if decision is not None and vote.proposal_id not in {
                d["decision"]["proposal_id"] for d in self.store.decisions()}:
            self.store.log_decision({"proposal": proposal.to_wire(),
                                     "decision": decision.to_wire()})
            if decision.approved:
                out.extend(self._apply_decision(proposal, old_threshold))
        return out

    def _on_gov_status(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        pid = env.body["proposal_id"]
        proposal = self.gov.proposals.get(pid)
        if proposal is None:
            raise NotFound(f"no such proposal {pid!r}")
        decision = self.gov.decisions.get(pid)
        return [self._reply(env, {
            "proposal": proposal.to_wire(),
            "votes": [v.to_wire() for v in self.gov.votes.get(pid, [])],
            "decision": decision.to_wire() if decision else None})]

    def _records_under(self, policy_id: str) -> list[StoredRecord]:
        return sorted((r for r in self.store.records.values()
                       if r.policy_id == policy_id and not r.record_id.startswith("polrec:")),
                      key=lambda r: r.record_id)

    def _apply_decision(self, proposal: Proposal, old_threshold: int) -> list[Envelope]:
        """Side effects of an approved decision beyond the policy flags."""
        out: list[Envelope] = []
        if proposal.action == Action.DISCARD:
            for record in self._records_under(proposal.target):
                blob_id = record.payload.get("blob")
                self.store.erase(record.record_id)
                if blob_id and self.store.exists(blob_id):
                    self.store.erase(blob_id)
        elif proposal.action in (Action.RESTRICT, Action.UNRESTRICT):
            policy = self.gov.policies[proposal.target]
            self._persist_policy(policy)  # re-persist with the restricted flag
        elif proposal.action == Action.RETHRESHOLD:
            self._persist_policy(self.gov.policies[proposal.target])
            out.extend(self._start_reshare(proposal, old_threshold))
        elif proposal.action == Action.COMPUTE:
            survey = next((s for s in self.surveys.values()
                           if s["policy_id"] == proposal.target), None)
            if survey is not None and survey["status"] == "draft":
                survey = dict(survey, status="active", decision=proposal.proposal_id)
                self._persist_survey(survey)
        return out

    # -- surveys -----------------------------------------------------------------------

    def _on_survey_create(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        body = env.body
        survey_id = body["survey_id"]
        if survey_id in self.surveys:
            raise BadSchema(f"survey {survey_id!r} already exists")
        schema = body["schema"]
        validate_schema(schema, self.field.p)
        threshold = int(body["threshold"])
        if threshold > MAJORITY:
            raise BadSchema(f"survey threshold {threshold} breaks t < n/2 for computation")
        min_r = int(body["min_respondents"])
        if min_r < 1:
            raise BadSchema("min_respondents must be >= 1")
        queries = [StatQuery.from_wire(q) for q in body["queries"]]
        for q in queries:
            q.validate(schema)
        policy_id = f"pol:{survey_id}"
        self._new_user_policy(policy_id, threshold, session.identity, PolicyKind.SURVEY)
        survey = {"survey_id": survey_id, "schema": schema, "threshold": threshold,
                  "min_respondents": min_r, "queries": [q.to_wire() for q in queries],
                  "status": "draft", "policy_id": policy_id, "creator": session.identity}
        self._persist_survey(survey)
        return [self._reply(env, {"survey_id": survey_id, "policy_id": policy_id})]

    def _survey_or_fail(self, survey_id: str, active: bool = True) -> dict:
        survey = self.surveys.get(survey_id)
        if survey is None:
            raise NotFound(f"survey {survey_id!r}")
        if active and survey["status"] != "active":
            raise NotAuthorized(f"survey {survey_id!r} is not active")
        return survey

    def _response_record_id(self, survey_id: str, respondent: str) -> str:
        return f"resp:{survey_id}:{respondent}"

    def _on_survey_respond(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        survey = self._survey_or_fail(env.body["survey_id"])
        schema = survey["schema"]
        rid = self._response_record_id(survey["survey_id"], session.identity)
        if self.store.exists(rid):
            raise AlreadyResponded(session.identity)
        attrs = env.body["attrs"]
        if set(attrs) != set(schema):
            raise SchemaMismatch(f"attributes {sorted(attrs)} != schema {sorted(schema)}")
        for attr, enc in attrs.items():
            width = attr_width(schema, attr)
            if len(enc.get("bits", [])) != width:
                raise SchemaMismatch(f"attribute {attr!r} needs {width} bit shares")
            if schema[attr]["type"] != "bool" and "int" not in enc:
                raise SchemaMismatch(f"attribute {attr!r} needs an integer share")
        self.store.put(StoredRecord(rid, "survey_share", survey["policy_id"], {
            "owner": session.identity, "survey": survey["survey_id"],
            "attrs": attrs, "status": "pending"}))
        return [self._reply(env, {"stored": rid})]

    def _on_survey_check(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        survey = self._survey_or_fail(env.body["survey_id"])
        respondent = session.identity
        rid = self._response_record_id(survey["survey_id"], respondent)
        record = self.store.get(rid)
        if record.payload["status"] != "pending":
            return [self._reply(env, {"accepted": True, "already": True})]
        sid = f"chk:{survey['survey_id']}:{respondent}"
        program = build_consistency_program(self.field, survey["schema"], respondent)
        inputs = response_input_shares(survey["schema"], respondent, record)
        reply_to = (session.identity, env.session, env.seq)

        def on_complete(node: NodeState, engine: NodeEngine) -> list[Envelope]:
            ok = all(v == 0 for v in engine.opened.values())
            rec = node.store.get(rid)
            if ok:
                node.store.put(StoredRecord(rid, rec.kind, rec.policy_id,
                                            dict(rec.payload, status="accepted")))
                return [node._session_reply(*reply_to, data={"accepted": True})]
            node.store.erase(rid)
            return [node._session_reply(*reply_to,
                                        error=ConsistencyFailure("dual encoding rejected"))]

        return self._start_mpc(sid, program, inputs, on_complete)

    def _on_survey_compute(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        survey = self._survey_or_fail(env.body["survey_id"])
        query_id = env.body["query_id"]
        decision_id = env.body.get("decision") or survey.get("decision", "")
        if not self.gov.decision_covers(decision_id, Action.COMPUTE, survey["policy_id"]):
            raise NotAuthorized("no approved compute decision covers this survey")
        declared = {q["query_id"]: StatQuery.from_wire(q) for q in survey["queries"]}
        if query_id not in declared:
            raise UndeclaredQuery(query_id)
        query = declared[query_id]
        accepted = sorted(
            r.payload["owner"] for r in self.store.by_kind("survey_share")
            if r.payload["survey"] == survey["survey_id"] and r.payload["status"] == "accepted")
        if len(accepted) < survey["min_respondents"]:
            raise TooFewRespondents(f"{len(accepted)} < {survey['min_respondents']}")
        sid = f"cmp:{survey['survey_id']}:{query_id}"
        if sid in self.mpc:
            raise SessionLimit(f"computation {sid} already running")
        program = build_compute_program(self.field, survey["schema"], query.predicate,
                                        query.percentage_of, accepted)
        inputs = {}
        for respondent in accepted:
            record = self.store.get(self._response_record_id(survey["survey_id"], respondent))
            inputs.update(response_input_shares(survey["schema"], respondent, record))
        reply_to = (session.identity, env.session, env.seq)
        per_record_program, _ = compile_predicate(self.field, survey["schema"], query.predicate)

        def on_complete(node: NodeState, engine: NodeEngine) -> list[Envelope]:
            numerator = engine.opened["numerator"]
            result = {"survey_id": survey["survey_id"], "query_id": query_id,
                      "respondents": len(accepted), "numerator": numerator,
                      "stats": {
                          "comparisons": program.stats.comparisons,
                          "top_level_mults": program.stats.top_level_mults,
                          "internal_bit_mults": program.stats.internal_bit_mults,
                          "rounds": engine.rounds_executed,
                          "opens": engine.opens_executed,
                      },
                      "per_record": {
                          "comparisons": per_record_program.stats.comparisons,
                          "top_level_mults": per_record_program.stats.top_level_mults,
                          "internal_bit_mults": per_record_program.stats.internal_bit_mults,
                      }}
            if query.percentage_of is not None:
                denominator = engine.opened["denominator"]
                result["denominator"] = denominator
                result["percentage"] = format_percentage(numerator, denominator)
            node.store.log_result(result)
            return [node._session_reply(*reply_to, data=result)]

        return self._start_mpc(sid, program, inputs, on_complete)

    def _on_survey_results(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        survey_id = env.body["survey_id"]
        self._survey_or_fail(survey_id, active=False)
        results = [r for r in self.store.results() if r.get("survey_id") == survey_id]
        return [self._reply(env, {"results": results})]

    def _on_survey_info(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        survey = self._survey_or_fail(env.body["survey_id"], active=False)
        return [self._reply(env, {k: survey[k] for k in (
            "survey_id", "schema", "threshold", "min_respondents", "queries",
            "status", "policy_id")})]

    # -- MPC session hosting --------------------------------------------------------

    def _start_mpc(self, sid: str, program, inputs: dict[str, int],
                   on_complete: Callable[[NodeState, NodeEngine], list[Envelope]]) -> list[Envelope]:
        if sid in self.mpc:
            raise SessionLimit(f"session {sid} already exists")
        if len(self.mpc) >= MAX_SESSIONS:
            raise SessionLimit(f"too many concurrent sessions ({MAX_SESSIONS})")
        engine = NodeEngine(sid, self.index, self.field, MAJORITY, NODE_COUNT,
                            program, inputs, self.rng.split(f"mpc-{sid}"))
        self.mpc[sid] = MpcContext(sid, engine, on_complete)
        msgs = engine.start()
        for parked in self.parked.pop(sid, []):
            msgs.extend(engine.receive(parked))
        return self._flush_gate_msgs(sid, msgs)

    def _flush_gate_msgs(self, sid: str, msgs: list[GateMsg]) -> list[Envelope]:
        ctx = self.mpc[sid]
        batches: dict[tuple[int, str], list[dict]] = {}
        for m in msgs:
            kind = GATE_ENVELOPE_KIND[ctx.engine.program.gates[m.gate_id].op]
            batches.setdefault((m.dest, kind), []).append(m.to_wire())
        out = [self._peer_envelope(dest, kind, {"batch": batch})
               for (dest, kind), batch in sorted(batches.items(), key=lambda kv: kv[0])]
        if ctx.engine.done:
            del self.mpc[sid]
            out.extend(ctx.on_complete(self, ctx.engine))
        return out

    def _on_gate_batch(self, env: Envelope, peer: int) -> list[Envelope]:
        out: list[Envelope] = []
        for item in env.body["batch"]:
            msg = GateMsg.from_wire(item, dest=self.index)
            ctx = self.mpc.get(msg.session)
            if ctx is None:
                parked = self.parked.setdefault(msg.session, [])
                if len(self.parked) > MAX_SESSIONS:
                    raise SessionLimit("too many parked sessions")
                parked.append(msg)
                continue
            replies = ctx.engine.receive(msg)
            out.extend(self._flush_gate_msgs(msg.session, replies))
        return out

    _on_mul_reshare = _on_gate_batch
    _on_open_contrib = _on_gate_batch
    _on_rand_contrib = _on_gate_batch

    # -- threshold migration (approved RETHRESHOLD) -----------------------------------

    def _start_reshare(self, proposal: Proposal, old_k: int) -> list[Envelope]:
        sid = f"rsh:{proposal.proposal_id}"
        # survey responses keep their fixed threshold; only chunked shares move
        records = tuple(r.record_id for r in self._records_under(proposal.target)
                        if "chunks" in r.payload)
        ctx = ReshareContext(sid, proposal.target, old_k, proposal.new_threshold, records)
        self.reshares[sid] = ctx
        out: list[Envelope] = []
        if self.index <= old_k and records:
            # quorum member: sub-share every chunk of every affected record
            per_dest: dict[int, dict[str, list[str]]] = {j: {} for j in range(1, NODE_COUNT + 1)}
            for record_id in records:
                record = self.store.get(record_id)
                for chunk_idx, chunk in enumerate(record.payload["chunks"]):
                    subs = reshare_subshares(
                        self.field, Share(self.index, int(chunk)), ctx.new_k, NODE_COUNT,
                        self.rng.split(f"{sid}-{record_id}-{chunk_idx}"))
                    for sub in subs:
                        per_dest[sub.index].setdefault(record_id, []).append(str(sub.value))
            for j in range(1, NODE_COUNT + 1):
                if j == self.index:
                    self._accept_reshare_subs(ctx, self.index, per_dest[j])
                else:
                    out.append(self._peer_envelope(j, "RESHARE_SUB", {
                        "session": sid, "subs": per_dest[j]}))
        for peer, subs in self._parked_reshare.pop(sid, []):
            self._accept_reshare_subs(ctx, peer, subs)
        out.extend(self._maybe_finish_reshare(ctx))
        return out

    def _accept_reshare_subs(self, ctx: ReshareContext, sender: int,
                             subs: dict[str, list[str]]) -> None:
        for record_id, chunk_values in subs.items():
            ctx.subs.setdefault(record_id, {})[sender] = [int(v) for v in chunk_values]

    def _on_reshare_sub(self, env: Envelope, peer: int) -> list[Envelope]:
        sid = env.body["session"]
        ctx = self.reshares.get(sid)
        if ctx is None:
            # our copy of the deciding vote has not arrived yet; hold the subs
            if len(self._parked_reshare) > MAX_SESSIONS:
                raise SessionLimit("too many parked reshare sessions")
            self._parked_reshare.setdefault(sid, []).append((peer, env.body["subs"]))
            return []
        self._accept_reshare_subs(ctx, peer, env.body["subs"])
        return self._maybe_finish_reshare(ctx)

    def _maybe_finish_reshare(self, ctx: ReshareContext) -> list[Envelope]:
        if ctx.done:
            return []
        quorum = list(range(1, ctx.old_k + 1))
        if any(set(ctx.subs.get(rid, {})) != set(quorum) for rid in ctx.record_ids):
            return []
        for record_id in ctx.record_ids:
            record = self.store.get(record_id)
            new_chunks = []
            for chunk_idx in range(len(record.payload["chunks"])):
                subs_for_me = {qi: ctx.subs[record_id][qi][chunk_idx] for qi in quorum}
                new_chunks.append(str(combine_subshares(self.field, quorum, subs_for_me)))
            self.store.erase(record_id)  # old share must not survive anywhere
            self.store.put(StoredRecord(record_id, record.kind, record.policy_id,
                                        dict(record.payload, chunks=new_chunks)))
        ctx.done = True
        return []

    # -- lost-share recovery ------------------------------------------------------------

    def _helper_set(self, lost: int, threshold: int) -> tuple[int, ...]:
        """Minimal ascending-index quorum excluding the lost node.

        A threshold-n sharing has no redundancy: losing one share destroys
        the polynomial, so recovery must refuse rather than fabricate.
        """
        helpers = tuple(i for i in range(1, NODE_COUNT + 1) if i != lost)[:threshold]
        if len(helpers) < threshold:
            from ..errors import QuorumTooSmall
            raise QuorumTooSmall(
                f"recovering index {lost} of a {threshold}-of-{NODE_COUNT} sharing "
                f"needs {threshold} other holders; only {NODE_COUNT - 1} exist")
        return helpers

    def _recover_ctx_as_helper(self, sid: str, record_id: str, lost: int) -> tuple[RecoverContext, list[Envelope]]:
        """Get or create helper-side state; first touch sends our pair masks."""
        ctx = self.recover.get(sid)
        if ctx is not None:
            return ctx, []
        record = self.store.get(record_id)
        threshold = self._policy_for(record).reveal_threshold
        helpers = self._helper_set(lost, threshold)
        ctx = RecoverContext(sid, record_id, lost, helpers, threshold)
        self.recover[sid] = ctx
        out: list[Envelope] = []
        if self.index in helpers:
            chunk_count = len(record.payload["chunks"])
            for other in helpers:
                if other == self.index:
                    continue
                masks = [self.rng.split(f"{sid}-m-{other}-{c}").field_element(self.field.p)
                         for c in range(chunk_count)]
                ctx.masks_out[other] = masks
                out.append(self._peer_envelope(other, "RECOVER_MASK", {
                    "session": sid, "record_id": record_id,
                    "values": [str(v) for v in masks]}))
        return ctx, out

    def _on_recover_init(self, env: Envelope, session: ClientSession) -> list[Envelope]:
        record_id = env.body["record_id"]
        lost = int(env.body["lost"])
        if not session.identity.startswith("i:"):
            record = self.store.get(record_id) if self.store.exists(record_id) else None
            if record is not None and record.payload.get("owner") != session.identity:
                raise NotAuthorized("recovery is for operators or the record owner")
        sid = f"rcv:{record_id}:{lost}"
        if self.index == lost:
            if sid in self._recover_done:
                return [self._reply(env, {"recovered": record_id})]
            threshold = int(env.body["threshold"])
            helpers = self._helper_set(lost, threshold)
            ctx = self.recover.setdefault(sid, RecoverContext(
                sid, record_id, lost, helpers, threshold))
            ctx.reply_to = (session.identity, env.session, env.seq)
            return self._maybe_finish_recover(ctx)
        ctx, out = self._recover_ctx_as_helper(sid, record_id, lost)
        role = [self._reply(env, {"helper": self.index in ctx.helpers})]
        return role + out + self._maybe_send_contribution(ctx)

    def _on_recover_mask(self, env: Envelope, peer: int) -> list[Envelope]:
        sid = env.body["session"]
        ctx, out = self._recover_ctx_as_helper(sid, env.body["record_id"],
                                               int(sid.rsplit(":", 1)[1]))
        ctx.masks_in[peer] = [int(v) for v in env.body["values"]]
        return out + self._maybe_send_contribution(ctx)

    def _maybe_send_contribution(self, ctx: RecoverContext) -> list[Envelope]:
        if ctx.sent or self.index not in ctx.helpers:
            return []
        others = [h for h in ctx.helpers if h != self.index]
        if set(ctx.masks_in) != set(others) or set(ctx.masks_out) != set(others):
            return []
        record = self.store.get(ctx.record_id)
        weights = lagrange_coeffs(self.field, list(ctx.helpers), ctx.lost)
        w = weights[list(ctx.helpers).index(self.index)]
        contrib = []
        for chunk_idx, chunk in enumerate(record.payload["chunks"]):
            acc = self.field.mul(w, int(chunk))
            for other in others:
                acc = self.field.add(acc, self.field.sub(
                    ctx.masks_out[other][chunk_idx], ctx.masks_in[other][chunk_idx]))
            contrib.append(str(acc))
        ctx.sent = True
        meta = {k: v for k, v in record.payload.items() if k != "chunks"}
        return [self._peer_envelope(ctx.lost, "RECOVER_CONTRIB", {
            "session": ctx.sid, "record_id": ctx.record_id, "values": contrib,
            "kind": record.kind, "policy_id": record.policy_id, "meta": meta,
            "threshold": ctx.threshold, "policy": self._policy_for(record).to_wire()})]

    def _on_recover_contrib(self, env: Envelope, peer: int) -> list[Envelope]:
        sid = env.body["session"]
        ctx = self.recover.get(sid)
        if ctx is None:
            threshold = int(env.body["threshold"])
            record_id = env.body["record_id"]
            lost = int(sid.rsplit(":", 1)[1])
            helpers = tuple(i for i in range(1, NODE_COUNT + 1) if i != lost)[:threshold]
            ctx = self.recover.setdefault(sid, RecoverContext(
                sid, record_id, lost, helpers, threshold))
        ctx.contribs[peer] = env.body
        return self._maybe_finish_recover(ctx)

    def _maybe_finish_recover(self, ctx: RecoverContext) -> list[Envelope]:
        if self.index != ctx.lost or set(ctx.contribs) != set(ctx.helpers):
            return []
        first = ctx.contribs[ctx.helpers[0]]
        chunk_count = len(first["values"])
        chunks = []
        for chunk_idx in range(chunk_count):
            acc = 0
            for h in ctx.helpers:
                acc = self.field.add(acc, int(ctx.contribs[h]["values"][chunk_idx]))
            chunks.append(str(acc))
        payload = dict(first["meta"], chunks=chunks)
        policy = AccessPolicy.from_wire(first["policy"])
        if policy.policy_id not in self.gov.policies:
            self._persist_policy(policy)
        self.store.put(StoredRecord(first["record_id"], first["kind"],
                                    first["policy_id"], payload))
        out = []
        if ctx.reply_to is not None and ctx.reply_to[1] in self.sessions:
            out.append(self._session_reply(*ctx.reply_to, data={
                "recovered": first["record_id"], "chunks": len(chunks)}))
        self._recover_done.add(ctx.sid)
        del self.recover[ctx.sid]
        return out
