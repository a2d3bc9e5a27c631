"""Durable per-node storage with true erasure.

Layout under data_dir:
    records.log     one canonical-JSON record per line (append-only)
    backup/records.log.bak   the single backup copy, kept in lockstep
    blobs/<hex-id>  replicated binary payloads
    decisions.log   governance decisions, append-only
    results.log     published survey statistics, world-readable

Erasing a record compacts both log files: the new file is written beside the
old one, fsynced, and atomically moved into place, so after the ack no byte
of the erased payload remains anywhere in the data directory (backup
included). Blob erasure deletes the blob file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

from ..errors import NotFound, StorageFailure
from ..wire import canonical, sha256_hex


@dataclass(frozen=True)
class StoredRecord:
    record_id: str
    kind: str        # key_share | email_share | survey_share | blob | registry_entry
    policy_id: str
    payload: dict
    consistency_hash: str = ""

    def to_wire(self) -> dict:
        return {"record_id": self.record_id, "kind": self.kind, "policy_id": self.policy_id,
                "payload": self.payload, "hash": self.consistency_hash}

    @classmethod
    def from_wire(cls, d: dict) -> StoredRecord:
        return cls(d["record_id"], d["kind"], d["policy_id"], d["payload"], d.get("hash", ""))


def _fsync_write(path: Path, data: bytes) -> None:
    with open(path, "wb") as f:
        f.write(data)
        f.flush()
        os.fsync(f.fileno())


def _append_line(path: Path, line: bytes) -> None:
    with open(path, "ab") as f:
        f.write(line + b"\n")
        f.flush()
        os.fsync(f.fileno())


class NodeStore:
    """Record log + blob directory + decision/result logs for one node."""

    def __init__(self, data_dir: str | Path):
        self.root = Path(data_dir)
        self.records_path = self.root / "records.log"
        self.backup_path = self.root / "backup" / "records.log.bak"
        self.blob_dir = self.root / "blobs"
        self.decisions_path = self.root / "decisions.log"
        self.results_path = self.root / "results.log"
        self.root.mkdir(parents=True, exist_ok=True)
        self.backup_path.parent.mkdir(exist_ok=True)
        self.blob_dir.mkdir(exist_ok=True)
        self.records: dict[str, StoredRecord] = {}
        self._load()

    def _load(self) -> None:
        if not self.records_path.exists():
            return
        with open(self.records_path, "rb") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                rec = StoredRecord.from_wire(json.loads(line))
                self.records[rec.record_id] = rec

    # -- records -----------------------------------------------------------

    def put(self, record: StoredRecord) -> None:
        """Durable before return; newer versions of an id shadow older lines."""
        line = canonical(record.to_wire())
        try:
            _append_line(self.records_path, line)
            _append_line(self.backup_path, line)
        except OSError as exc:
            raise StorageFailure(str(exc)) from exc
        self.records[record.record_id] = record

    def get(self, record_id: str) -> StoredRecord:
        rec = self.records.get(record_id)
        if rec is None:
            raise NotFound(f"record {record_id!r}")
        return rec

    def exists(self, record_id: str) -> bool:
        return record_id in self.records

    def by_kind(self, kind: str) -> list[StoredRecord]:
        return sorted((r for r in self.records.values() if r.kind == kind),
                      key=lambda r: r.record_id)

    def erase(self, record_id: str) -> None:
        """Compact the record (and its blob) out of every file, then ack."""
        if record_id not in self.records:
            raise NotFound(f"record {record_id!r}")
        del self.records[record_id]
        self._compact()
        blob = self._blob_path(record_id)
        if blob.exists():
            blob.unlink()

    def _compact(self) -> None:
        """Rewrite both log files from live records; destroys old content."""
        payload = b"".join(canonical(r.to_wire()) + b"\n"
                           for r in sorted(self.records.values(), key=lambda r: r.record_id))
        for path in (self.records_path, self.backup_path):
            tmp = path.with_suffix(".tmp")
            try:
                _fsync_write(tmp, payload)
                os.replace(tmp, path)
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc

    # -- blobs ---------------------------------------------------------------

    def _blob_path(self, blob_id: str):
        # blob filenames are hex so ids with separators stay filesystem-safe
        return self.blob_dir / sha256_hex(blob_id.encode())[:32]

    def put_blob(self, blob_id: str, data: bytes) -> str:
        _fsync_write(self._blob_path(blob_id), data)
        return sha256_hex(data)

    def get_blob(self, blob_id: str) -> bytes:
        path = self._blob_path(blob_id)
        if not path.exists():
            raise NotFound(f"blob {blob_id!r}")
        return path.read_bytes()

    # -- append-only logs ------------------------------------------------------

    def log_decision(self, entry: dict) -> None:
        _append_line(self.decisions_path, canonical(entry))

    def log_result(self, entry: dict) -> None:
        _append_line(self.results_path, canonical(entry))

    def decisions(self) -> list[dict]:
        if not self.decisions_path.exists():
            return []
        return [json.loads(line) for line in self.decisions_path.read_bytes().splitlines() if line]

    def results(self) -> list[dict]:
        if not self.results_path.exists():
            return []
        return [json.loads(line) for line in self.results_path.read_bytes().splitlines() if line]

    # -- forensics (used by tests and the harness byte-scanner) ---------------

    def scan_bytes(self, needle: bytes) -> list[str]:
        """Paths under data_dir containing the needle; empty means erased."""
        hits = []
        for path in sorted(self.root.rglob("*")):
            if path.is_file() and needle in path.read_bytes():
                hits.append(str(path.relative_to(self.root)))
        return hits
