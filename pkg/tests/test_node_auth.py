import pytest

from quorumvault.errors import BadSignature, ReplayedNonce, UnknownIdentity
from quorumvault.harness.cluster import SimCluster
from quorumvault.wire import Envelope


@pytest.fixture
def cluster(tmp_path):
    return SimCluster(tmp_path, seed=51)


def drive(cluster, env):
    cluster.network.send(env)
    cluster.network.pump()


def test_registered_user_establishes_session(cluster):
    alice = cluster.new_user("alice")
    assert len(alice.sessions) == 5
    assert len({s.key for s in alice.sessions.values()}) == 5


def test_unknown_identity_rejected(cluster):
    node = cluster.nodes[1]
    env = Envelope("", 0, "u:ghost", "n:1", "AUTH_HELLO",
                   {"id": "u:ghost", "nonce": "00" * 16, "eph": "11" * 32})
    replies = node.handle(env)
    assert replies[0].body["error"] == "UnknownIdentity"


def test_replayed_nonce_rejected(cluster):
    alice = cluster.new_user("alice")
    # rebuild a full handshake by hand, then replay the final message
    from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
    from quorumvault.governance import canonical

    node = cluster.nodes[1]
    eph = X25519PrivateKey.from_private_bytes(bytes(31) + b"\x01")
    eph_pub = eph.public_key().public_bytes_raw().hex()
    hello = Envelope("", 90, "u:alice", "n:1", "AUTH_HELLO",
                     {"id": "u:alice", "nonce": "22" * 16, "eph": eph_pub})
    challenge = node.handle(hello)[0]
    transcript = canonical({"nn": challenge.body["nonce"], "cn": "22" * 16,
                            "ce": eph_pub, "ne": challenge.body["eph"], "id": "u:alice"})
    response = Envelope("", 91, "u:alice", "n:1", "AUTH_RESPONSE",
                        {"id": "u:alice", "nonce": challenge.body["nonce"],
                         "sig": alice.sign_key.sign(transcript).hex()})
    ok = node.handle(response)[0]
    assert ok.kind == "AUTH_OK"
    replayed = node.handle(response)[0]
    assert replayed.body["error"] == "ReplayedNonce"


def test_bad_challenge_signature_rejected(cluster):
    cluster.new_user("alice")
    from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
    from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
    from quorumvault.governance import canonical

    node = cluster.nodes[1]
    eph = X25519PrivateKey.from_private_bytes(bytes(31) + b"\x02")
    eph_pub = eph.public_key().public_bytes_raw().hex()
    hello = Envelope("", 95, "u:alice", "n:1", "AUTH_HELLO",
                     {"id": "u:alice", "nonce": "33" * 16, "eph": eph_pub})
    challenge = node.handle(hello)[0]
    wrong_key = Ed25519PrivateKey.from_private_bytes(bytes(31) + b"\x03")
    transcript = canonical({"nn": challenge.body["nonce"], "cn": "33" * 16,
                            "ce": eph_pub, "ne": challenge.body["eph"], "id": "u:alice"})
    response = Envelope("", 96, "u:alice", "n:1", "AUTH_RESPONSE",
                        {"id": "u:alice", "nonce": challenge.body["nonce"],
                         "sig": wrong_key.sign(transcript).hex()})
    reply = node.handle(response)[0]
    assert reply.body["error"] == "BadChallengeResponse"


def test_seq_replay_no_state_change(cluster):
    alice = cluster.new_user("alice")
    session = alice.sessions[1]
    seq = alice._seq.next(session.session_id)
    env = Envelope(session.session_id, seq, "u:alice", "n:1", "NOTE_PUT", {
        "note_id": "note-replay", "threshold": 3, "ciphertext": "00",
        "codec": "identity", "chunks": ["1"]}).with_mac(session.key)
    node = cluster.nodes[1]
    first = node.handle(env)
    assert first[0].body["ok"]
    errors_before = len(node.error_log)
    records_before = dict(node.store.records)
    replay = node.handle(env)
    assert replay == []
    assert node.error_log[errors_before:] and "BadSeq" in node.error_log[-1]
    assert node.store.records == records_before


def test_tampered_envelope_rejected(cluster):
    alice = cluster.new_user("alice")
    session = alice.sessions[1]
    seq = alice._seq.next(session.session_id)
    env = Envelope(session.session_id, seq, "u:alice", "n:1", "EMAIL_LIST",
                   {}).with_mac(session.key)
    tampered = Envelope(env.session, env.seq, env.sender, env.recipient,
                        "ERASE", {"record_id": "x"}, env.mac)
    node = cluster.nodes[1]
    out = node.handle(tampered)
    assert out == []
    assert "BadSignature" in node.error_log[-1]


def test_unknown_kind_rejected(cluster):
    alice = cluster.new_user("alice")
    with pytest.raises(Exception) as exc_info:
        alice.request(1, "FROBNICATE", {})
    assert type(exc_info.value).__name__ == "UnknownKind"
