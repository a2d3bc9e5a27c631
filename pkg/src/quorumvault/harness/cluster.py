"""In-process five-node deployment with clients, faults, and forensics.

Everything is driven by one scenario seed: node keys, client keys, protocol
randomness, and the delivery schedule. Two runs of the same scenario produce
byte-identical transcripts, decision logs, and opened values, which is the
property the determinism acceptance check hashes.
"""

from __future__ import annotations

import shutil
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from ..client.api import VaultClient
from ..errors import ScriptError
from ..governance import NODE_COUNT
from ..node.config import NodeConfig, build_test_deployment
from ..node.state import NodeState
from ..node.storage import NodeStore, StoredRecord
from ..rng import SeedStream
from .transport import SimClientChannel, SimNetwork


class SimCluster:
    def __init__(self, base_dir: str | Path, seed: int | str = 0,
                 schedule: str = "seeded", p: int | None = None):
        self.base_dir = Path(base_dir)
        self.seed = seed
        self.deployment, self.configs = build_test_deployment(
            self.base_dir, seed=f"deploy-{seed}", p=p)
        self.network = SimNetwork(seed, schedule)
        self.nodes: dict[int, NodeState] = {}
        for config in self.configs:
            self._boot(config)
        self.rng = SeedStream(seed, "cluster")
        self.clients: dict[str, VaultClient] = {}

    def _boot(self, config: NodeConfig) -> None:
        state = NodeState(config)
        self.nodes[config.index] = state
        self.network.attach_node(config.index, state)

    # -- actors ---------------------------------------------------------------

    def operator(self, index: int) -> VaultClient:
        identity = f"i:{index}"
        if identity not in self.clients:
            client = VaultClient(identity, self.configs[index - 1].sign_key,
                                 self.deployment, SimClientChannel(self.network, identity),
                                 SeedStream(self.seed, f"client-{identity}"))
            client.connect()
            self.clients[identity] = client
        return self.clients[identity]

    def new_user(self, name: str, register: bool = True) -> VaultClient:
        identity = f"u:{name}"
        if identity in self.clients:
            return self.clients[identity]
        rng = SeedStream(self.seed, f"client-{identity}")
        sign_key = Ed25519PrivateKey.from_private_bytes(rng.split("sign").bytes(32))
        enc_key = X25519PrivateKey.from_private_bytes(rng.split("enc").bytes(32))
        if register:
            self.operator(1).register_user(
                name, sign_key.public_key().public_bytes_raw().hex(),
                enc_key.public_key().public_bytes_raw().hex())
        client = VaultClient(identity, sign_key, self.deployment,
                             SimClientChannel(self.network, identity), rng, enc_key)
        if register:
            client.connect()
        self.clients[identity] = client
        return client

    # -- faults ------------------------------------------------------------------

    def crash(self, index: int) -> None:
        self.network.detach_node(index)
        self.nodes.pop(index, None)

    def restart(self, index: int) -> NodeState:
        """Reload the node from its data directory (fresh incarnation)."""
        self._boot(self.configs[index - 1])
        return self.nodes[index]

    def wipe(self, index: int) -> None:
        """Hardware loss: the node's disk is gone."""
        data_dir = self.configs[index - 1].data_dir
        if Path(data_dir).exists():
            shutil.rmtree(data_dir)

    def corrupt_record(self, index: int, record_id: str) -> None:
        """Flip a stored share chunk on one node (silent disk corruption)."""
        store = self.nodes[index].store
        record = store.get(record_id)
        payload = dict(record.payload)
        if "chunks" in payload:
            chunks = list(payload["chunks"])
            chunks[0] = str((int(chunks[0]) + 1) % self.nodes[index].field.p)
            payload["chunks"] = chunks
        else:
            payload["corrupted"] = True
        store.put(StoredRecord(record.record_id, record.kind, record.policy_id,
                               payload, record.consistency_hash))

    def corrupt_blob(self, index: int, blob_id: str) -> None:
        store = self.nodes[index].store
        data = bytearray(store.get_blob(blob_id))
        data[index % len(data)] ^= index  # distinct corruption per node
        store.put_blob(blob_id, bytes(data))
        record = store.get(blob_id)
        from ..wire import sha256_hex
        store.put(StoredRecord(record.record_id, record.kind, record.policy_id,
                               record.payload, sha256_hex(bytes(data))))

    # -- forensics -------------------------------------------------------------------

    def byte_scan(self, needle: bytes) -> dict[int, list[str]]:
        """Search every node's data directory; {} means the bytes are gone."""
        hits = {}
        for index in range(1, NODE_COUNT + 1):
            data_dir = self.configs[index - 1].data_dir
            if not Path(data_dir).exists():
                continue
            store = self.nodes[index].store if index in self.nodes else NodeStore(data_dir)
            found = store.scan_bytes(needle)
            if found:
                hits[index] = found
        return hits

    def transcript_hash(self) -> str:
        return self.network.transcript_hash()

    def decision_logs(self) -> dict[int, list[dict]]:
        return {i: n.store.decisions() for i, n in sorted(self.nodes.items())}

    def result_logs(self) -> dict[int, list[dict]]:
        return {i: n.store.results() for i, n in sorted(self.nodes.items())}


# -- scripted scenarios (harness CLI + determinism checks) ----------------------


def run_scenario(scenario: dict, workdir: str | Path) -> dict:
    """Execute a canonical-JSON scenario; returns logs and the transcript hash.

    Script ops: note_create, note_read, note_update, mail_send, mail_fetch,
    key_escrow, key_retrieve, propose, vote, crash, restart, wipe, recover.
    """
    cluster = SimCluster(Path(workdir), seed=scenario.get("seed", 0),
                         schedule=scenario.get("schedule", "seeded"))
    outputs: list[dict] = []
    named: dict[str, str] = {}

    def resolve(value):
        return named.get(value, value) if isinstance(value, str) else value

    for step in scenario.get("script", []):
        op = step.get("op")
        try:
            if op == "note_create":
                user = cluster.new_user(step["user"])
                note_id = user.note_create(step["text"], step.get("threshold", "majority"))
                named[step.get("as", "note")] = note_id
                outputs.append({"op": op, "note_id": note_id})
            elif op == "note_read":
                user = cluster.new_user(step["user"])
                text = user.note_read(resolve(step["note"]))
                outputs.append({"op": op, "text": text})
            elif op == "note_update":
                user = cluster.new_user(step["user"])
                user.note_update(resolve(step["note"]), step["text"])
                outputs.append({"op": op})
            elif op == "mail_send":
                user = cluster.new_user(step["user"])
                cluster.new_user(step["to"])  # recipient keys must be registered
                email_id = user.email_send(step["to"], step["text"])
                named[step.get("as", "mail")] = email_id
                outputs.append({"op": op, "email_id": email_id})
            elif op == "mail_fetch":
                user = cluster.new_user(step["user"])
                mail = user.email_fetch()
                outputs.append({"op": op, "bodies": [m["body"] for m in mail]})
            elif op == "key_escrow":
                user = cluster.new_user(step["user"])
                key = bytes.fromhex(step["key"])
                key_id = user.key_escrow(key, step.get("threshold", "majority"))
                named[step.get("as", "key")] = key_id
                outputs.append({"op": op, "key_id": key_id})
            elif op == "key_retrieve":
                user = cluster.new_user(step["user"])
                key = user.key_retrieve(resolve(step["key"]))
                outputs.append({"op": op, "key": key.hex()})
            elif op == "propose":
                actor = cluster.operator(step["institution"]) if "institution" in step \
                    else cluster.new_user(step["user"])
                pid = actor.propose(step["action"], resolve(step["target"]),
                                    step.get("new_threshold", 0))
                named[step.get("as", "proposal")] = pid
                outputs.append({"op": op, "proposal_id": pid})
            elif op == "vote":
                decision = cluster.operator(step["institution"]).vote(
                    resolve(step["proposal"]), step.get("approve", True))
                outputs.append({"op": op, "decision": decision})
            elif op == "crash":
                cluster.crash(step["node"])
                outputs.append({"op": op, "node": step["node"]})
            elif op == "restart":
                cluster.restart(step["node"])
                outputs.append({"op": op, "node": step["node"]})
            elif op == "wipe":
                cluster.wipe(step["node"])
                outputs.append({"op": op, "node": step["node"]})
            elif op == "recover":
                actor = cluster.operator(step.get("institution", 1))
                result = actor.recover(resolve(step["record"]), step["node"],
                                       step.get("threshold", 3))
                outputs.append({"op": op, "recovered": result})
            else:
                raise ScriptError(f"unknown op {op!r}")
        except ScriptError:
            raise
        except Exception as exc:
            if step.get("expect_error"):
                outputs.append({"op": op, "error": type(exc).__name__})
            else:
                raise
    return {
        "outputs": outputs,
        "decisions": {str(k): v for k, v in cluster.decision_logs().items()},
        "results": {str(k): v for k, v in cluster.result_logs().items()},
        "transcript_hash": cluster.transcript_hash(),
        "transcript_length": len(cluster.network.transcript),
    }
