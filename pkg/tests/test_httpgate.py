"""The HTTP binding must behave exactly like the other transports."""

import json
import socket
import urllib.request

import pytest

from quorumvault.node.httpgate import Gateway


def free_port() -> int:
    s = socket.socket()
    s.bind(("127.0.0.1", 0))
    port = s.getsockname()[1]
    s.close()
    return port


@pytest.fixture(scope="module")
def gateway(tmp_path_factory):
    gw = Gateway(tmp_path_factory.mktemp("gw"), seed="gw-test", base_port=free_port())
    gw.start()
    yield gw
    gw.stop()


def post(gateway, node, doc):
    url = f"http://{gateway.deployment.http_endpoints[node]}/v1/envelope"
    req = urllib.request.Request(url, data=json.dumps(doc).encode(),
                                 headers={"Content-Type": "application/json"})
    with urllib.request.urlopen(req, timeout=20) as resp:
        return json.loads(resp.read())


def get_params(gateway, node):
    url = f"http://{gateway.deployment.http_endpoints[node]}/v1/params"
    with urllib.request.urlopen(url, timeout=10) as resp:
        return json.loads(resp.read())


def test_params_cross_check(gateway):
    docs = [get_params(gateway, i) for i in range(1, 6)]
    assert len({d["p"] for d in docs}) == 1
    assert [d["node"] for d in docs] == [1, 2, 3, 4, 5]
    assert all(d["majority"] == 3 for d in docs)


def test_envelope_round_trip_params_kind(gateway):
    env = {"v": 1, "session": "", "seq": 0, "from": "u:web", "to": "n:1",
           "kind": "PARAMS_GET", "body": {}, "mac": ""}
    replies = post(gateway, 1, env)
    assert len(replies) == 1
    assert replies[0]["body"]["ok"] is True
    assert replies[0]["body"]["p"] == str(gateway.deployment.p)


def test_auth_over_http_with_python_client(gateway, tmp_path):
    # the Python client can ride the HTTP binding too: transport parity
    from quorumvault.client.api import VaultClient
    from quorumvault.rng import SeedStream
    from quorumvault.wire import Envelope
    import threading

    creds_path = gateway.register_test_user("webalice", tmp_path)
    creds = json.loads(creds_path.read_text())

    class HttpChannel:
        def __init__(self):
            self.box = []
            self.lock = threading.Lock()

        def send(self, env):
            node = int(env.recipient[2:])
            threading.Thread(target=self._post, args=(node, env.to_wire()),
                             daemon=True).start()

        def _post(self, node, doc):
            replies = post(gateway, node, doc)
            with self.lock:
                self.box.extend(Envelope.from_wire(d) for d in replies)

        def poll(self):
            import time
            time.sleep(0.03)
            with self.lock:
                out, self.box = self.box, []
            return out

    from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
    from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey
    from cryptography.hazmat.primitives.serialization import load_der_private_key
    import base64

    sign_key = load_der_private_key(base64.b64decode(creds["sign_priv_pkcs8"]), None)
    enc_key = load_der_private_key(base64.b64decode(creds["enc_priv_pkcs8"]), None)
    client = VaultClient("u:webalice", sign_key, gateway.deployment, HttpChannel(),
                         SeedStream("http-test", "c"), enc_key)
    client.connect()
    note_id = client.note_create("over http")
    assert client.note_read(note_id) == "over http"
