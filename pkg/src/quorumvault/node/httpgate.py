"""Thin HTTP binding for browser clients.

Each node exposes POST /v1/envelope on its own port; the body is one
envelope JSON document and the response is the JSON array of envelopes the
node addressed back to the caller (the gateway waits briefly for replies
that depend on other nodes' messages, so multi-node protocols work when the
browser fans out its requests concurrently). GET /v1/params serves the
field parameters for the client-side majority cross-check. The native
socket wire remains the canonical binding; this one exists so in-page code
can reach the cluster, with TLS assumed in front in any real deployment.
"""

from __future__ import annotations

import argparse
import json
import sys
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
from cryptography.hazmat.primitives.serialization import (
    Encoding, NoEncryption, PrivateFormat,
)

from ..governance import MAJORITY, NODE_COUNT
from ..harness.transport import SimNetwork
from ..node.config import build_test_deployment
from ..node.state import NodeState
from ..rng import SeedStream
from ..wire import Envelope

REPLY_TIMEOUT = 15.0


class Gateway:
    """Five node states behind one lock-serialized in-process network."""

    def __init__(self, base_dir: str | Path, seed: str = "gateway", base_port: int = 7950):
        self.deployment, self.configs = build_test_deployment(
            Path(base_dir), seed=seed, p=None)
        self.seed = seed
        self.base_port = base_port
        self.network = SimNetwork(seed, schedule="fifo")
        self.nodes: dict[int, NodeState] = {}
        for config in self.configs:
            state = NodeState(config)
            self.nodes[config.index] = state
            self.network.attach_node(config.index, state)
        self.lock = threading.Lock()
        self.servers: list[ThreadingHTTPServer] = []
        self.deployment.http_endpoints = {
            i: f"127.0.0.1:{base_port + i - 1}" for i in range(1, NODE_COUNT + 1)}

    def register_test_user(self, name: str, out_dir: Path) -> Path:
        """Deterministic user keys, registered at every node; credentials
        written as PKCS8 base64 so WebCrypto can import them."""
        import base64

        rng = SeedStream(self.seed, f"webuser-{name}")
        sign_key = Ed25519PrivateKey.from_private_bytes(rng.split("sign").bytes(32))
        enc_key = X25519PrivateKey.from_private_bytes(rng.split("enc").bytes(32))
        sign_pk = sign_key.public_key().public_bytes_raw().hex()
        enc_pk = enc_key.public_key().public_bytes_raw().hex()
        for node in self.nodes.values():
            node._register(name, sign_pk, enc_pk)
        doc = {
            "user": name,
            "sign_pk": sign_pk,
            "enc_pk": enc_pk,
            "sign_priv_pkcs8": base64.b64encode(sign_key.private_bytes(
                Encoding.DER, PrivateFormat.PKCS8, NoEncryption())).decode(),
            "enc_priv_pkcs8": base64.b64encode(enc_key.private_bytes(
                Encoding.DER, PrivateFormat.PKCS8, NoEncryption())).decode(),
            "node_sign_pks": self.deployment.node_sign_pks,
            "http_endpoints": self.deployment.http_endpoints,
            "p": str(self.deployment.p),
        }
        path = Path(out_dir) / f"webuser-{name}.json"
        path.write_text(json.dumps(doc, indent=2, sort_keys=True))
        return path

    # -- request handling -------------------------------------------------------

    def inject(self, node_index: int, env: Envelope) -> list[dict]:
        """Deliver one envelope addressed to node_index; wait for the replies
        to this specific request (matched on the originator and seq)."""
        if env.recipient != f"n:{node_index}":
            raise ValueError("envelope recipient does not match this port")
        sender, seq = env.sender, env.seq
        with self.lock:
            self.network.send(env)
            self.network.pump()
            found = self._drain(sender, node_index, seq)
        deadline = time.monotonic() + REPLY_TIMEOUT
        while not found and time.monotonic() < deadline:
            time.sleep(0.02)
            with self.lock:
                self.network.pump()
                found = self._drain(sender, node_index, seq)
        return found

    def _drain(self, sender: str, node_index: int, seq: int) -> list[dict]:
        box = self.network.boxes.get(sender, [])
        matched, rest = [], []
        for env in box:
            if env.sender == f"n:{node_index}" and env.body.get("re") == seq:
                matched.append(env.to_wire())
            else:
                rest.append(env)
        self.network.boxes[sender] = rest
        return matched

    def params(self, node_index: int) -> dict:
        return {"p": str(self.deployment.p), "n": NODE_COUNT, "majority": MAJORITY,
                "node": node_index,
                "node_sign_pks": self.deployment.node_sign_pks}

    # -- servers -------------------------------------------------------------------

    def start(self) -> None:
        for i in range(1, NODE_COUNT + 1):
            server = ThreadingHTTPServer(
                ("127.0.0.1", self.base_port + i - 1), _make_handler(self, i))
            server.daemon_threads = True
            self.servers.append(server)
            threading.Thread(target=server.serve_forever, daemon=True).start()

    def stop(self) -> None:
        for server in self.servers:
            server.shutdown()
            server.server_close()
        self.servers = []


def _make_handler(gateway: Gateway, node_index: int):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, *args):  # quiet
            pass

        def _cors(self):
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS")
            self.send_header("Access-Control-Allow-Headers", "content-type")

        def _json(self, code: int, doc) -> None:
            payload = json.dumps(doc).encode()
            self.send_response(code)
            self._cors()
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(payload)))
            self.end_headers()
            self.wfile.write(payload)

        def do_OPTIONS(self):
            self.send_response(204)
            self._cors()
            self.end_headers()

        def do_GET(self):
            if self.path == "/v1/params":
                self._json(200, gateway.params(node_index))
            else:
                self._json(404, {"error": "NotFound"})

        def do_POST(self):
            if self.path != "/v1/envelope":
                self._json(404, {"error": "NotFound"})
                return
            length = int(self.headers.get("Content-Length", 0))
            try:
                env = Envelope.from_wire(json.loads(self.rfile.read(length)))
                replies = gateway.inject(node_index, env)
            except (ValueError, KeyError) as exc:
                self._json(400, {"error": "BadEnvelope", "detail": str(exc)})
                return
            self._json(200, replies)

    return Handler


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="quorumvault-gateway",
                                     description="HTTP binding for browser clients")
    parser.add_argument("--dir", required=True, help="working directory for node stores")
    parser.add_argument("--base-port", type=int, default=7950)
    parser.add_argument("--seed", default="gateway")
    parser.add_argument("--test-user", action="append", default=[],
                        help="register a deterministic user and write its credentials")
    args = parser.parse_args(argv)
    gateway = Gateway(args.dir, seed=args.seed, base_port=args.base_port)
    for name in args.test_user:
        path = gateway.register_test_user(name, Path(args.dir))
        print(f"credentials {path}", flush=True)
    gateway.start()
    print(f"gateway ready on ports {args.base_port}..{args.base_port + NODE_COUNT - 1}",
          flush=True)
    try:
        while True:
            time.sleep(3600)
    except KeyboardInterrupt:
        gateway.stop()
    return 0


if __name__ == "__main__":
    sys.exit(main())
