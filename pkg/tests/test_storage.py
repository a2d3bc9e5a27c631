import pytest

from quorumvault.errors import NotFound
from quorumvault.node.storage import NodeStore, StoredRecord


def rec(rid, value="12345678901234567"):
    return StoredRecord(rid, "key_share", "pol-1", {"shares": [{"i": 1, "v": value}]})


def test_put_get_round_trip(tmp_path):
    store = NodeStore(tmp_path)
    store.put(rec("r-1"))
    assert store.get("r-1").payload["shares"][0]["v"] == "12345678901234567"


def test_get_missing(tmp_path):
    with pytest.raises(NotFound):
        NodeStore(tmp_path).get("ghost")


def test_durability_across_reopen(tmp_path):
    store = NodeStore(tmp_path)
    store.put(rec("r-1"))
    store.put(rec("r-2", "999"))
    again = NodeStore(tmp_path)
    assert again.get("r-1") == rec("r-1")
    assert again.get("r-2") == rec("r-2", "999")


def test_update_shadows_old_version(tmp_path):
    store = NodeStore(tmp_path)
    store.put(rec("r-1", "111"))
    store.put(rec("r-1", "222"))
    assert NodeStore(tmp_path).get("r-1").payload["shares"][0]["v"] == "222"


def test_erase_leaves_no_bytes(tmp_path):
    store = NodeStore(tmp_path)
    secret = "88887777666655554444"
    store.put(rec("victim", secret))
    store.put(rec("keeper", "123"))
    assert store.scan_bytes(secret.encode())
    store.erase("victim")
    assert store.scan_bytes(secret.encode()) == []
    assert store.get("keeper")
    with pytest.raises(NotFound):
        store.get("victim")
    # erased from the backup too, and from a fresh load
    assert NodeStore(tmp_path).exists("victim") is False


def test_erase_also_scrubs_shadowed_versions(tmp_path):
    store = NodeStore(tmp_path)
    store.put(rec("r-1", "31337313373133731337"))
    store.put(rec("r-1", "42424242424242424242"))
    store.erase("r-1")
    assert store.scan_bytes(b"31337313373133731337") == []
    assert store.scan_bytes(b"42424242424242424242") == []


def test_blob_round_trip_and_erase(tmp_path):
    store = NodeStore(tmp_path)
    digest = store.put_blob("b-1", b"\x00\x01binary")
    assert len(digest) == 64
    assert store.get_blob("b-1") == b"\x00\x01binary"
    store.put(StoredRecord("b-1", "blob", "pol", {}, digest))
    store.erase("b-1")
    with pytest.raises(NotFound):
        store.get_blob("b-1")


def test_logs(tmp_path):
    store = NodeStore(tmp_path)
    store.log_decision({"proposal_id": "p", "approved": True})
    store.log_result({"query_id": "q", "count": 3})
    assert store.decisions() == [{"approved": True, "proposal_id": "p"}]
    assert store.results() == [{"count": 3, "query_id": "q"}]
