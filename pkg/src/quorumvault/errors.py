"""Exception vocabulary shared across the package.

Node replies carry the exception class name as the protocol error code, so
client code and the CLI can match on names without importing node
internals. Keep names stable.
"""


class QuorumVaultError(Exception):
    """Base class for all package errors."""


# --- field / secret sharing ---

class ZeroInverse(QuorumVaultError):
    """Multiplicative inverse of zero requested."""


class BadThreshold(QuorumVaultError):
    """Sharing parameters violate 1 <= k <= n < p."""


class DuplicateIndex(QuorumVaultError):
    """Share indices must be distinct."""


class NotEnoughShares(QuorumVaultError):
    """Fewer than threshold shares supplied."""


class InconsistentShares(QuorumVaultError):
    """Supplied shares do not lie on a single degree-(k-1) polynomial."""


class NoCommitmentGroup(QuorumVaultError):
    """Field parameters carry no commitment group."""


class QuorumTooSmall(QuorumVaultError):
    """Fewer participants than the operation's quorum requires."""


class IndexCollision(QuorumVaultError):
    """The lost share index appears among the helpers."""


# --- secure computation ---

class WidthOverflow(QuorumVaultError):
    """Value does not fit the declared bit width, or 2^width >= p."""


class ReprMismatch(QuorumVaultError):
    """Operands carry incompatible representations or thresholds."""


class ThresholdTooHigh(QuorumVaultError):
    """Passive multiplication requires t = k-1 < n/2."""


class RoundDesync(QuorumVaultError):
    """A gate message arrived for a round the session cannot accept."""


class NotABit(QuorumVaultError):
    """A shared bit opened to a non-boolean value."""


class WidthMismatch(QuorumVaultError):
    """Public comparison bound does not fit the operand width."""


class NotAuthorized(QuorumVaultError):
    """No decision or ownership covers the requested action."""


class OpenFailed(QuorumVaultError):
    """Opening a shared value failed the share cross-check."""


class UnknownAttribute(QuorumVaultError):
    """Predicate references an attribute absent from the schema."""


class TypeMismatch(QuorumVaultError):
    """Predicate literal type does not match the attribute type."""


class NodeUnreachable(QuorumVaultError):
    """A required node endpoint could not be reached."""


# --- governance ---

class DuplicateVote(QuorumVaultError):
    """An institution tried to cast a conflicting second vote."""


class BadSignature(QuorumVaultError):
    """Signature verification failed."""


class NotOwner(QuorumVaultError):
    """Requesting user does not own the record."""


class Restricted(QuorumVaultError):
    """Access to the record is restricted by governance."""


# --- node service ---

class UnknownIdentity(QuorumVaultError):
    """Credentials reference no registered user or configured peer."""


class BadChallengeResponse(QuorumVaultError):
    """Mutual-authentication challenge response failed verification."""


class ReplayedNonce(QuorumVaultError):
    """An authentication nonce was reused."""


class NotFound(QuorumVaultError):
    """Record or target does not exist at this node."""


class StorageFailure(QuorumVaultError):
    """Durable write or compaction failed."""


class BadSeq(QuorumVaultError):
    """Envelope sequence number not strictly increasing."""


class UnknownKind(QuorumVaultError):
    """Envelope kind is not in the dispatch table."""


class SessionLimit(QuorumVaultError):
    """Too many concurrent sessions at this node."""


class QuorumUnreachable(QuorumVaultError):
    """Not enough nodes reachable to answer a quorum query."""


class ReplicaMismatch(QuorumVaultError):
    """Replicated blob copies disagree beyond a minority."""


# --- user services ---

class NoteTooLarge(QuorumVaultError):
    """Note text exceeds the size cap."""


class DecryptFailure(QuorumVaultError):
    """Authenticated decryption failed."""


class BadKeyLength(QuorumVaultError):
    """Escrowed keys must be exactly 256 bits."""


class UnknownRecipient(QuorumVaultError):
    """Recipient is not present in the user registry."""


class RegistryInconsistent(QuorumVaultError):
    """Registry replicas disagree; no majority value."""


class BadSchema(QuorumVaultError):
    """Survey schema violates the attribute rules."""


class SchemaMismatch(QuorumVaultError):
    """Survey answers do not match the schema."""


class AlreadyResponded(QuorumVaultError):
    """This respondent already submitted to the survey."""


class ConsistencyFailure(QuorumVaultError):
    """Dual-representation consistency check rejected a submission."""


class TooFewRespondents(QuorumVaultError):
    """Fewer accepted responses than the survey minimum."""


class UndeclaredQuery(QuorumVaultError):
    """Query was not declared when the survey was created."""


# --- harness ---

class ScriptError(QuorumVaultError):
    """Scenario script step is malformed or impossible."""


class FieldTooLarge(QuorumVaultError):
    """Exhaustive checker refuses fields larger than p = 7."""
