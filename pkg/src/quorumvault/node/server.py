"""Socket binding: length-delimited canonical-JSON envelopes over AEAD streams.

One selectors-based event loop per node; envelopes are processed serially in
arrival order by the same NodeState the harness drives. Client connections
start in the clear for the (secret-free, signature-bound) mutual
authentication envelopes and switch to AES-256-GCM once the session key is
established; node-to-node connections run a nonce handshake over the
pre-shared pair key and are encrypted from the first envelope.
"""

from __future__ import annotations

import argparse
import json
import selectors
import socket
import sys
from dataclasses import dataclass, field

from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from ..services.crypto import hkdf
from ..wire import Envelope, canonical, frame, read_frames
from .config import NodeConfig, load_node_config
from .state import NodeState


def _counter_nonce(counter: int) -> bytes:
    return counter.to_bytes(12, "big")


@dataclass
class StreamCipher:
    enc_key: bytes
    dec_key: bytes
    enc_ctr: int = 0
    dec_ctr: int = 0

    def encrypt(self, payload: bytes) -> bytes:
        out = AESGCM(self.enc_key).encrypt(_counter_nonce(self.enc_ctr), payload, b"")
        self.enc_ctr += 1
        return out

    def decrypt(self, payload: bytes) -> bytes:
        out = AESGCM(self.dec_key).decrypt(_counter_nonce(self.dec_ctr), payload, b"")
        self.dec_ctr += 1
        return out


@dataclass
class Conn:
    sock: socket.socket
    buffer: bytearray = field(default_factory=bytearray)
    cipher: StreamCipher | None = None
    identity: str = ""      # bound client identity or "n:<peer>"
    greeted: bool = False
    # outbound peer links dial asynchronously: connecting -> hello_sent -> ready
    state: str = "ready"
    peer_index: int = 0
    nonce_a: bytes = b""


def peer_stream_keys(psk: bytes, nonce_a: bytes, nonce_b: bytes,
                     initiator: bool) -> StreamCipher:
    salt = nonce_a + nonce_b
    a2b = hkdf(psk, salt=salt, info=b"qv-link-a2b")
    b2a = hkdf(psk, salt=salt, info=b"qv-link-b2a")
    return StreamCipher(a2b, b2a) if initiator else StreamCipher(b2a, a2b)


def session_stream_keys(session_key: bytes, server_side: bool) -> StreamCipher:
    c2n = hkdf(session_key, salt=b"", info=b"qv-stream-c2n")
    n2c = hkdf(session_key, salt=b"", info=b"qv-stream-n2c")
    return StreamCipher(n2c, c2n) if server_side else StreamCipher(c2n, n2c)


class NodeServer:
    def __init__(self, config: NodeConfig):
        self.config = config
        self.state = NodeState(config)
        self.selector = selectors.DefaultSelector()
        host, port = config.listen_address.rsplit(":", 1)
        self.listener = socket.create_server((host, int(port)))
        self.listener.setblocking(False)
        self.selector.register(self.listener, selectors.EVENT_READ, None)
        self.conns: dict[socket.socket, Conn] = {}
        self.by_identity: dict[str, Conn] = {}
        self.peer_conns: dict[int, Conn] = {}
        self.peer_backlog: dict[int, list[bytes]] = {}
        self.running = False

    # -- outbound ----------------------------------------------------------

    def _send_frame(self, conn: Conn, payload: bytes) -> None:
        if conn.cipher is not None:
            payload = conn.cipher.encrypt(payload)
        try:
            conn.sock.sendall(frame(payload))
        except OSError:
            self._drop(conn)

    def _dial_peer(self, index: int) -> None:
        """Start a non-blocking dial; the event loop finishes the handshake."""
        if index in self.peer_conns:
            return
        host, port = self.config.deployment.endpoints[index].rsplit(":", 1)
        sock = socket.socket()
        sock.setblocking(False)
        try:
            sock.connect_ex((host, int(port)))
        except OSError:
            sock.close()
            return
        nonce_a = self.state.rng.split(f"link-{index}-{self.state.clock}").bytes(16)
        conn = Conn(sock, identity=f"n:{index}", greeted=True,
                    state="connecting", peer_index=index, nonce_a=nonce_a)
        self.conns[sock] = conn
        self.peer_conns[index] = conn
        self.selector.register(sock, selectors.EVENT_READ | selectors.EVENT_WRITE, conn)

    def _on_peer_writable(self, conn: Conn) -> None:
        if conn.state != "connecting":
            return
        err = conn.sock.getsockopt(socket.SOL_SOCKET, socket.SO_ERROR)
        if err:
            self._drop(conn)
            return
        hello = canonical({"hello": "peer", "from": self.config.index,
                           "nonce": conn.nonce_a.hex()})
        try:
            conn.sock.sendall(frame(hello))
        except OSError:
            self._drop(conn)
            return
        conn.state = "hello_sent"
        self.selector.modify(conn.sock, selectors.EVENT_READ, conn)

    def _finish_dial(self, conn: Conn, raw: bytes) -> None:
        try:
            nonce_b = bytes.fromhex(json.loads(raw)["nonce"])
        except (ValueError, KeyError):
            self._drop(conn)
            return
        conn.cipher = peer_stream_keys(self.config.pair_key(conn.peer_index),
                                       conn.nonce_a, nonce_b, initiator=True)
        conn.state = "ready"
        for payload in self.peer_backlog.pop(conn.peer_index, []):
            self._send_frame(conn, payload)

    def _to_peer(self, index: int, payload: bytes) -> None:
        conn = self.peer_conns.get(index)
        if conn is not None and conn.state == "ready":
            self._send_frame(conn, payload)
            return
        self.peer_backlog.setdefault(index, []).append(payload)
        if conn is None:
            self._dial_peer(index)

    def _route(self, envelopes: list[Envelope], origin: Conn | None) -> None:
        for env in envelopes:
            if env.recipient.startswith("n:"):
                self._to_peer(int(env.recipient[2:]), env.encode())
                continue
            conn = self.by_identity.get(env.recipient)
            if conn is None and origin is not None and origin.identity in ("", env.recipient):
                conn = origin
            if conn is not None:
                self._send_frame(conn, env.encode())
                self._maybe_secure_session(conn, env)

    def _maybe_secure_session(self, conn: Conn, env: Envelope) -> None:
        """After AUTH_OK leaves in the clear, upgrade the connection."""
        if env.kind == "AUTH_OK" and conn.cipher is None:
            session = self.state.sessions.get(env.body.get("session", ""))
            if session is not None:
                conn.cipher = session_stream_keys(session.key, server_side=True)
                conn.identity = session.identity
                self.by_identity[session.identity] = conn

    # -- inbound ------------------------------------------------------------

    def _drop(self, conn: Conn) -> None:
        try:
            self.selector.unregister(conn.sock)
        except (KeyError, ValueError):
            pass
        self.conns.pop(conn.sock, None)
        if conn.identity.startswith("n:"):
            self.peer_conns.pop(int(conn.identity[2:]), None)
        if self.by_identity.get(conn.identity) is conn:
            self.by_identity.pop(conn.identity, None)
        conn.sock.close()

    def _accept(self) -> None:
        try:
            sock, _ = self.listener.accept()
        except OSError:
            return
        sock.setblocking(False)
        conn = Conn(sock)
        self.conns[sock] = conn
        self.selector.register(sock, selectors.EVENT_READ, conn)

    def _on_readable(self, conn: Conn) -> None:
        try:
            data = conn.sock.recv(65536)
        except (BlockingIOError, InterruptedError):
            return
        except OSError:
            self._drop(conn)
            return
        if not data:
            self._drop(conn)
            return
        conn.buffer += data
        for raw in read_frames(conn.buffer):
            self._on_frame(conn, raw)

    def _on_frame(self, conn: Conn, raw: bytes) -> None:
        if conn.state == "hello_sent":
            self._finish_dial(conn, raw)
            return
        if conn.cipher is not None:
            try:
                raw = conn.cipher.decrypt(raw)
            except Exception:
                self._drop(conn)
                return
        if not conn.greeted and conn.identity == "":
            # first frame decides: peer hello or a clear-text auth envelope
            try:
                doc = json.loads(raw)
            except ValueError:
                self._drop(conn)
                return
            if doc.get("hello") == "peer":
                self._greet_peer(conn, doc)
                return
            conn.greeted = True
        try:
            env = Envelope.decode(raw)
        except (ValueError, KeyError):
            self.state.error_log.append("undecodable frame")
            return
        self._route(self.state.handle(env), origin=conn)

    def _greet_peer(self, conn: Conn, doc: dict) -> None:
        peer_index = int(doc["from"])
        nonce_a = bytes.fromhex(doc["nonce"])
        nonce_b = self.state.rng.split(f"greet-{peer_index}-{self.state.clock}").bytes(16)
        self._send_frame(conn, canonical({"nonce": nonce_b.hex()}))
        conn.cipher = peer_stream_keys(self.config.pair_key(peer_index),
                                       nonce_a, nonce_b, initiator=False)
        conn.identity = f"n:{peer_index}"
        conn.greeted = True
        self.peer_conns.setdefault(peer_index, conn)

    # -- loop -----------------------------------------------------------------

    def serve_forever(self, poll_interval: float = 0.2) -> None:
        self.running = True
        while self.running:
            for key, events in self.selector.select(timeout=poll_interval):
                if key.data is None:
                    self._accept()
                    continue
                if events & selectors.EVENT_WRITE:
                    self._on_peer_writable(key.data)
                if events & selectors.EVENT_READ:
                    self._on_readable(key.data)

    def stop(self) -> None:
        self.running = False

    def close(self) -> None:
        self.stop()
        for conn in list(self.conns.values()):
            self._drop(conn)
        self.selector.unregister(self.listener)
        self.listener.close()
        self.selector.close()


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="quorumvault-node",
                                     description="Run one institution node")
    parser.add_argument("--config", required=True, help="path to node.conf")
    args = parser.parse_args(argv)
    server = NodeServer(load_node_config(args.config))
    print(f"node {server.config.index} listening on {server.config.listen_address}",
          file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.close()
    return 0


if __name__ == "__main__":
    sys.exit(main())
