"""Deployment and per-node configuration.

A deployment fixes what every participant must agree on: the field modulus,
the five node endpoints, and the five institution public keys. Each node
additionally holds its own signing key, the pairwise pre-shared 256-bit
link keys, and a data directory. Config files are plain key-value text;
the deployment document is canonical JSON so clients can hash-compare it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey, Ed25519PublicKey

from ..fields import FieldParams
from ..governance import NODE_COUNT
from ..rng import SeedStream
from ..services.crypto import hkdf


@dataclass
class Deployment:
    """Public, shared-by-everyone description of the five-node cluster."""

    p: int
    endpoints: dict[int, str]           # index -> host:port
    node_sign_pks: dict[int, str]       # index -> hex Ed25519 public key
    http_endpoints: dict[int, str] = field(default_factory=dict)

    def field_params(self) -> FieldParams:
        return FieldParams(self.p)

    def node_pub(self, index: int) -> Ed25519PublicKey:
        return Ed25519PublicKey.from_public_bytes(bytes.fromhex(self.node_sign_pks[index]))

    def to_json(self) -> str:
        return json.dumps({
            "p": str(self.p),
            "endpoints": {str(i): e for i, e in sorted(self.endpoints.items())},
            "node_sign_pks": {str(i): k for i, k in sorted(self.node_sign_pks.items())},
            "http_endpoints": {str(i): e for i, e in sorted(self.http_endpoints.items())},
        }, sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> Deployment:
        d = json.loads(text)
        return cls(
            p=int(d["p"]),
            endpoints={int(i): e for i, e in d["endpoints"].items()},
            node_sign_pks={int(i): k for i, k in d["node_sign_pks"].items()},
            http_endpoints={int(i): e for i, e in d.get("http_endpoints", {}).items()},
        )


@dataclass
class NodeConfig:
    index: int
    deployment: Deployment
    sign_key: Ed25519PrivateKey
    psks: dict[tuple[int, int], bytes]      # unordered pair (min, max) -> 32B key
    data_dir: Path
    seed: str = "node"
    listen_address: str = ""
    bootstrap_registry: dict[str, dict] = field(default_factory=dict)

    def __post_init__(self):
        if not 1 <= self.index <= NODE_COUNT:
            raise ValueError(f"node index {self.index} outside 1..{NODE_COUNT}")

    def pair_key(self, other: int) -> bytes:
        a, b = sorted((self.index, other))
        return self.psks[(a, b)]

    def link_mac_key(self, other: int) -> bytes:
        return hkdf(self.pair_key(other), salt=b"", info=b"qv-peer-mac-v1")

    def rng(self) -> SeedStream:
        return SeedStream(self.seed, f"node-{self.index}")


def build_test_deployment(base_dir: Path, seed: str = "deploy", p: int | None = None,
                          base_port: int = 0) -> tuple[Deployment, list[NodeConfig]]:
    """Five node configs with fresh keys and PSKs; used by the harness,
    the socket tests, and the deployment generator CLI."""
    from ..fields import DEFAULT_PRIME

    rng = SeedStream(seed, "deployment")
    keys = {}
    pks = {}
    for i in range(1, NODE_COUNT + 1):
        priv = Ed25519PrivateKey.from_private_bytes(rng.split(f"sign-{i}").bytes(32))
        keys[i] = priv
        pks[i] = priv.public_key().public_bytes_raw().hex()
    psks = {}
    for a in range(1, NODE_COUNT + 1):
        for b in range(a + 1, NODE_COUNT + 1):
            psks[(a, b)] = rng.split(f"psk-{a}-{b}").bytes(32)
    endpoints = {i: f"127.0.0.1:{base_port + i - 1}" if base_port else ""
                 for i in range(1, NODE_COUNT + 1)}
    deployment = Deployment(p or DEFAULT_PRIME, endpoints, pks)
    configs = []
    for i in range(1, NODE_COUNT + 1):
        configs.append(NodeConfig(
            index=i,
            deployment=deployment,
            sign_key=keys[i],
            psks=dict(psks),
            data_dir=Path(base_dir) / f"node{i}",
            seed=f"{seed}-node",
            listen_address=endpoints[i],
        ))
    return deployment, configs


# -- plain key-value node config files ---------------------------------------


def parse_kv(text: str) -> dict[str, str]:
    out = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def load_node_config(path: str | Path) -> NodeConfig:
    """node.conf keys: index, deployment, key_file, psk_file, data_dir,
    listen_address, seed (optional), registry_file (optional)."""
    root = Path(path).parent
    kv = parse_kv(Path(path).read_text())
    deployment = Deployment.from_json((root / kv["deployment"]).read_text())
    sign_key = Ed25519PrivateKey.from_private_bytes(bytes.fromhex(
        (root / kv["key_file"]).read_text().strip()))
    psks = {}
    for line in (root / kv["psk_file"]).read_text().splitlines():
        if not line.strip():
            continue
        a, b, hexkey = line.split()
        psks[(int(a), int(b))] = bytes.fromhex(hexkey)
    registry = {}
    if kv.get("registry_file") and (root / kv["registry_file"]).exists():
        registry = json.loads((root / kv["registry_file"]).read_text())
    index = int(kv["index"])
    return NodeConfig(
        index=index,
        deployment=deployment,
        sign_key=sign_key,
        psks=psks,
        data_dir=root / kv.get("data_dir", f"data{index}"),
        seed=kv.get("seed", "node"),
        listen_address=kv.get("listen_address", deployment.endpoints.get(index, "")),
        bootstrap_registry=registry,
    )
