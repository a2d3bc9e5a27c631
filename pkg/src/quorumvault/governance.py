"""Access structures and institution governance.

Every protected item carries an AccessPolicy naming its reveal threshold;
revealing or computing on the item needs that many institution votes, while
restricting, discarding, resharing, or un-restricting always needs only a
simple majority: taking data away from circulation is deliberately easier
than bringing it out. One institution, one vote, signed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from .errors import BadSignature, DuplicateVote, NotFound

NODE_COUNT = 5
MAJORITY = 3
UNANIMITY = 5


class Action(str, Enum):
    REVEAL = "REVEAL"
    COMPUTE = "COMPUTE"
    RESTRICT = "RESTRICT"
    UNRESTRICT = "UNRESTRICT"
    DISCARD = "DISCARD"
    RETHRESHOLD = "RETHRESHOLD"


# actions that surface data obey the item's own threshold; actions that
# remove or tighten access need only a majority, whatever the item demands
_EXPOSING = (Action.REVEAL, Action.COMPUTE)


class PolicyKind(str, Enum):
    USER_ITEM = "user_item"
    SURVEY = "survey"
    REGISTRY = "registry"


@dataclass(frozen=True)
class AccessPolicy:
    policy_id: str
    reveal_threshold: int
    owner: str
    kind: PolicyKind = PolicyKind.USER_ITEM

    def __post_init__(self):
        if not 1 <= self.reveal_threshold <= NODE_COUNT:
            raise ValueError(f"reveal threshold {self.reveal_threshold} outside 1..{NODE_COUNT}")

    def to_wire(self) -> dict:
        return {"policy_id": self.policy_id, "reveal_threshold": self.reveal_threshold,
                "owner": self.owner, "kind": self.kind.value}

    @classmethod
    def from_wire(cls, d: dict) -> AccessPolicy:
        return cls(d["policy_id"], int(d["reveal_threshold"]), d["owner"], PolicyKind(d["kind"]))


@dataclass(frozen=True)
class Proposal:
    proposal_id: str
    action: Action
    target: str
    requested_by: str
    created_at: int          # logical timestamp of the proposer
    new_threshold: int = 0   # RETHRESHOLD payload

    def to_wire(self) -> dict:
        d = {"proposal_id": self.proposal_id, "action": self.action.value,
             "target": self.target, "requested_by": self.requested_by,
             "created_at": self.created_at}
        if self.new_threshold:
            d["new_threshold"] = self.new_threshold
        return d

    @classmethod
    def from_wire(cls, d: dict) -> Proposal:
        return cls(d["proposal_id"], Action(d["action"]), d["target"], d["requested_by"],
                   int(d["created_at"]), int(d.get("new_threshold", 0)))


def canonical(obj) -> bytes:
    """Sorted keys, no whitespace: the signing and hashing form everywhere."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()


@dataclass(frozen=True)
class Vote:
    proposal_id: str
    institution: int
    choice: str  # "approve" | "reject"
    signature: str = ""

    def signing_body(self) -> bytes:
        return canonical({"proposal_id": self.proposal_id, "institution": self.institution,
                          "choice": self.choice})

    def signed(self, key: Ed25519PrivateKey) -> Vote:
        return Vote(self.proposal_id, self.institution, self.choice,
                    key.sign(self.signing_body()).hex())

    def verify(self, pub: Ed25519PublicKey) -> None:
        try:
            pub.verify(bytes.fromhex(self.signature), self.signing_body())
        except (InvalidSignature, ValueError) as exc:
            raise BadSignature(f"vote by institution {self.institution}") from exc

    def to_wire(self) -> dict:
        return {"proposal_id": self.proposal_id, "institution": self.institution,
                "choice": self.choice, "signature": self.signature}

    @classmethod
    def from_wire(cls, d: dict) -> Vote:
        return cls(d["proposal_id"], int(d["institution"]), d["choice"], d["signature"])


@dataclass(frozen=True)
class Decision:
    proposal_id: str
    approved: bool
    approving_set: tuple[int, ...]

    def to_wire(self) -> dict:
        return {"proposal_id": self.proposal_id, "approved": self.approved,
                "approving_set": list(self.approving_set)}

    @classmethod
    def from_wire(cls, d: dict) -> Decision:
        return cls(d["proposal_id"], bool(d["approved"]), tuple(d["approving_set"]))


def required_votes(policy: AccessPolicy, action: Action) -> int:
    """Votes needed: the item's own threshold to expose, a majority to curb."""
    if action in _EXPOSING:
        return policy.reveal_threshold
    return MAJORITY


def tally(proposal: Proposal, policy: AccessPolicy, votes: list[Vote],
          institution_keys: dict[int, Ed25519PublicKey] | None = None) -> Decision:
    """Deterministic tally over a vote multiset.

    Re-submitted identical votes are idempotent; a conflicting second vote
    from the same institution raises DuplicateVote. Signature checks run
    when keys are supplied.
    """
    seen: dict[int, Vote] = {}
    for v in votes:
        if v.proposal_id != proposal.proposal_id:
            raise ValueError(f"vote references {v.proposal_id}, not {proposal.proposal_id}")
        if institution_keys is not None:
            v.verify(institution_keys[v.institution])
        prior = seen.get(v.institution)
        if prior is not None:
            if prior.choice != v.choice:
                raise DuplicateVote(f"institution {v.institution} voted twice, conflicting")
            continue
        seen[v.institution] = v
    approving = tuple(sorted(i for i, v in seen.items() if v.choice == "approve"))
    needed = required_votes(policy, proposal.action)
    return Decision(proposal.proposal_id, len(approving) >= needed, approving)


class GovernanceLog:
    """One node's proposal/vote/decision book-keeping.

    Decisions are computed independently by every node from the same vote
    multiset, so honest nodes always coincide; the harness asserts that.
    """

    def __init__(self, institution_keys: dict[int, Ed25519PublicKey] | None = None):
        self.proposals: dict[str, Proposal] = {}
        self.policies: dict[str, AccessPolicy] = {}
        self.restricted: set[str] = set()
        self.votes: dict[str, list[Vote]] = {}
        self.decisions: dict[str, Decision] = {}
        self.institution_keys = institution_keys

    def add_policy(self, policy: AccessPolicy) -> None:
        self.policies[policy.policy_id] = policy

    def open_proposal(self, proposal: Proposal) -> None:
        if proposal.target not in self.policies:
            raise NotFound(f"no such target {proposal.target!r}")
        for p in self.proposals.values():
            if (p.action, p.target) == (proposal.action, proposal.target) \
                    and p.proposal_id not in self.decisions:
                raise DuplicateVote(f"open proposal already exists for {proposal.action} {proposal.target}")
        self.proposals[proposal.proposal_id] = proposal

    def add_vote(self, vote: Vote) -> Decision | None:
        """Record a vote; returns a Decision once the outcome is certain."""
        proposal = self.proposals.get(vote.proposal_id)
        if proposal is None:
            raise NotFound(f"no such proposal {vote.proposal_id!r}")
        if vote.proposal_id in self.decisions:
            return self.decisions[vote.proposal_id]
        if self.institution_keys is not None:
            vote.verify(self.institution_keys[vote.institution])
        box = self.votes.setdefault(vote.proposal_id, [])
        prior = next((v for v in box if v.institution == vote.institution), None)
        if prior is not None:
            if prior.choice != vote.choice:
                raise DuplicateVote(f"institution {vote.institution} voted twice, conflicting")
            return None  # idempotent re-submission
        box.append(vote)
        policy = self.policies[proposal.target]
        needed = required_votes(policy, proposal.action)
        approvals = sum(1 for v in box if v.choice == "approve")
        rejections = sum(1 for v in box if v.choice == "reject")
        if approvals >= needed:
            decision = tally(proposal, policy, box)
        elif rejections > NODE_COUNT - needed:
            decision = tally(proposal, policy, box)  # can no longer pass
        else:
            return None
        self.decisions[vote.proposal_id] = decision
        if decision.approved:
            self._apply(proposal)
        return decision

    def _apply(self, proposal: Proposal) -> None:
        if proposal.action == Action.RESTRICT:
            self.restricted.add(proposal.target)
        elif proposal.action == Action.UNRESTRICT:
            self.restricted.discard(proposal.target)
        elif proposal.action == Action.RETHRESHOLD and proposal.new_threshold:
            old = self.policies[proposal.target]
            self.policies[proposal.target] = AccessPolicy(
                old.policy_id, proposal.new_threshold, old.owner, old.kind)

    def approved_decision(self, proposal_id: str) -> Decision | None:
        d = self.decisions.get(proposal_id)
        return d if d is not None and d.approved else None

    def decision_covers(self, decision_id: str, action: Action, target: str) -> bool:
        d = self.approved_decision(decision_id)
        if d is None:
            return False
        p = self.proposals.get(decision_id)
        return p is not None and p.action == action and p.target == target
