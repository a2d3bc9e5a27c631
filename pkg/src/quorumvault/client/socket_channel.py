"""Client transport over real sockets.

Mirrors the server's stream discipline: clear frames for the mutual
authentication envelopes, AES-256-GCM streams afterwards. The VaultClient
calls secure(node, session_key) once it has verified AUTH_OK.
"""

from __future__ import annotations

import socket
import time

from ..errors import NodeUnreachable
from ..node.config import Deployment
from ..node.server import StreamCipher, session_stream_keys
from ..wire import Envelope, frame, read_frames


class _NodeConn:
    def __init__(self, sock: socket.socket):
        self.sock = sock
        self.buffer = bytearray()
        self.cipher: StreamCipher | None = None


class SocketChannel:
    def __init__(self, deployment: Deployment, timeout: float = 10.0):
        self.deployment = deployment
        self.timeout = timeout
        self.conns: dict[int, _NodeConn] = {}

    def _conn(self, node: int) -> _NodeConn:
        conn = self.conns.get(node)
        if conn is not None:
            return conn
        host, port = self.deployment.endpoints[node].rsplit(":", 1)
        try:
            sock = socket.create_connection((host, int(port)), timeout=self.timeout)
        except OSError as exc:
            raise NodeUnreachable(f"node {node} at {host}:{port}: {exc}") from exc
        sock.setblocking(False)
        conn = _NodeConn(sock)
        self.conns[node] = conn
        return conn

    def send(self, env: Envelope) -> None:
        node = int(env.recipient[2:])
        conn = self._conn(node)
        payload = env.encode()
        if conn.cipher is not None:
            payload = conn.cipher.encrypt(payload)
        conn.sock.setblocking(True)
        try:
            conn.sock.sendall(frame(payload))
        except OSError as exc:
            self.reset(node)
            raise NodeUnreachable(f"node {node}: {exc}") from exc
        finally:
            try:
                conn.sock.setblocking(False)
            except OSError:
                pass

    def poll(self) -> list[Envelope]:
        out: list[Envelope] = []
        deadline = time.monotonic() + 0.2
        while time.monotonic() < deadline and not out:
            for node, conn in list(self.conns.items()):
                try:
                    data = conn.sock.recv(65536)
                except (BlockingIOError, InterruptedError):
                    continue
                except OSError:
                    self.reset(node)
                    continue
                if not data:
                    self.reset(node)
                    continue
                conn.buffer += data
                for raw in read_frames(conn.buffer):
                    if conn.cipher is not None:
                        raw = conn.cipher.decrypt(raw)
                    out.append(Envelope.decode(raw))
            if not out:
                time.sleep(0.005)
        return out

    def secure(self, node: int, session_key: bytes) -> None:
        self._conn(node).cipher = session_stream_keys(session_key, server_side=False)

    def reset(self, node: int) -> None:
        conn = self.conns.pop(node, None)
        if conn is not None:
            try:
                conn.sock.close()
            except OSError:
                pass
