import pytest

from quorumvault.errors import (
    NodeUnreachable,
    NotOwner,
    NoteTooLarge,
    Restricted,
    UnknownIdentity,
)
from quorumvault.harness.cluster import SimCluster


@pytest.fixture
def cluster(tmp_path):
    return SimCluster(tmp_path, seed=11)


def test_note_round_trip(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("pin: 1234")
    assert alice.note_read(note_id) == "pin: 1234"


def test_note_unanimity_round_trip(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("passport 123", threshold="unanimity")
    assert alice.note_read(note_id) == "passport 123"


def test_note_too_large(cluster):
    alice = cluster.new_user("alice")
    with pytest.raises(NoteTooLarge):
        alice.note_create("x" * (64 * 1024 + 1))


def test_note_read_below_threshold_fails(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("secret", threshold="majority")
    cluster.crash(5)
    assert alice.note_read(note_id) == "secret"  # 4 of 5 still >= 3
    cluster.crash(4)
    cluster.crash(3)
    with pytest.raises(NodeUnreachable):
        alice.note_read(note_id)


def test_note_update_destroys_old_key_shares(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("v1 text")
    old_chunks = [
        cluster.nodes[i].store.get(note_id).payload["chunks"] for i in range(1, 6)
    ]
    alice.note_update(note_id, "v2 text")
    assert alice.note_read(note_id) == "v2 text"
    for node_chunks in old_chunks:
        for chunk in node_chunks:
            assert cluster.byte_scan(chunk.encode()) == {}


def test_non_owner_denied(cluster):
    alice = cluster.new_user("alice")
    bob = cluster.new_user("bob")
    note_id = alice.note_create("mine")
    with pytest.raises(NotOwner):
        bob.request(1, "NOTE_GET", {"note_id": note_id})


def test_unregistered_user_cannot_authenticate(cluster):
    mallory = cluster.new_user("mallory", register=False)
    with pytest.raises(UnknownIdentity):
        mallory.connect((1,))


def test_impersonation_scope_limited(cluster):
    # an attacker with alice's key reads alice's records but nobody else's
    alice = cluster.new_user("alice")
    bob = cluster.new_user("bob")
    alice_note = alice.note_create("alice data")
    bob_note = bob.note_create("bob data")
    from quorumvault.client.api import VaultClient
    from quorumvault.harness.transport import SimClientChannel
    from quorumvault.rng import SeedStream
    intruder = VaultClient("u:alice", alice.sign_key, cluster.deployment,
                           SimClientChannel(cluster.network, "u:alice"),
                           SeedStream("intruder", "x"), alice.enc_key)
    intruder.connect()
    assert intruder.note_read(alice_note) == "alice data"
    with pytest.raises(NotOwner):
        intruder.request(1, "NOTE_GET", {"note_id": bob_note})


def test_restrict_blocks_owner_until_unrestricted(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("sensitive")
    op1 = cluster.operator(1)
    pid = op1.propose("RESTRICT", f"pol:{note_id}")
    for i in (1, 2, 3):
        cluster.operator(i).vote(pid)
    with pytest.raises(Restricted):
        alice.note_read(note_id)
    pid2 = op1.propose("UNRESTRICT", f"pol:{note_id}")
    for i in (1, 2, 4):
        cluster.operator(i).vote(pid2)
    assert alice.note_read(note_id) == "sensitive"


def test_escrow_round_trip(cluster):
    alice = cluster.new_user("alice")
    key = bytes(range(32))
    key_id = alice.key_escrow(key, threshold="majority", label="backup")
    assert alice.key_retrieve(key_id) == key


def test_escrow_retrieve_by_other_user_denied(cluster):
    alice = cluster.new_user("alice")
    bob = cluster.new_user("bob")
    key_id = alice.key_escrow(bytes(32))
    with pytest.raises(NotOwner):
        bob.key_retrieve(key_id)


def test_escrow_encrypt_decrypt_helpers(cluster):
    alice = cluster.new_user("alice")
    key_id = alice.key_escrow(bytes(range(32)))
    blob = b"file contents \x00\x01"
    sealed = alice.encrypt_with_escrowed(key_id, blob)
    assert sealed != blob
    assert alice.decrypt_with_escrowed(key_id, sealed) == blob


def test_replica_check(cluster):
    alice = cluster.new_user("alice")
    note_id = alice.note_create("replicated")
    consistent, flagged = alice.replica_check(f"blob:{note_id}")
    assert consistent and flagged == []
    cluster.corrupt_blob(2, f"blob:{note_id}")
    consistent, flagged = alice.replica_check(f"blob:{note_id}")
    assert consistent and flagged == [2]
    cluster.corrupt_blob(3, f"blob:{note_id}")
    cluster.corrupt_blob(4, f"blob:{note_id}")
    consistent, _ = alice.replica_check(f"blob:{note_id}")
    assert consistent is False
