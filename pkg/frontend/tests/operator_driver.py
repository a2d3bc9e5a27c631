"""Governance driver for the browser tests: operator acts over the HTTP
binding (survey creation, votes, computation). The browser client has no
governance surface by design, so the tests shell out to this instead.

argv: seed base_port mode survey_id   (mode: create | compute)
"""

import json
import sys
import threading
import time
import urllib.request

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from quorumvault.client.api import VaultClient
from quorumvault.node.config import Deployment
from quorumvault.rng import SeedStream
from quorumvault.wire import Envelope


class HttpChannel:
    """Posts in background threads: multi-node sessions only complete once
    every node has its request, so the fan-out must be concurrent."""

    def __init__(self, endpoints):
        self.endpoints = endpoints
        self.box = []
        self.lock = threading.Lock()

    def send(self, env):
        threading.Thread(target=self._post, args=(env,), daemon=True).start()

    def _post(self, env):
        node = int(env.recipient[2:])
        url = f"http://{self.endpoints[node]}/v1/envelope"
        req = urllib.request.Request(url, data=json.dumps(env.to_wire()).encode(),
                                     headers={"Content-Type": "application/json"})
        with urllib.request.urlopen(req, timeout=60) as resp:
            replies = [Envelope.from_wire(d) for d in json.loads(resp.read())]
        with self.lock:
            self.box.extend(replies)

    def poll(self):
        time.sleep(0.05)
        with self.lock:
            out, self.box = self.box, []
        return out


SCHEMA = {"female": {"type": "bool"}, "age": {"type": "uint", "width": 8},
          "diabetes": {"type": "bool"}, "coeliac": {"type": "bool"}}
QUERY = {"query_id": "q", "predicate": {"all": [
    {"attr": "female"}, {"attr": "age", "min": 32, "max": 40},
    {"attr": "diabetes"}, {"attr": "coeliac"}]}}


def main() -> int:
    seed, base_port, mode, survey_id = sys.argv[1], int(sys.argv[2]), sys.argv[3], sys.argv[4]
    rng = SeedStream(seed, "deployment")
    keys = {i: Ed25519PrivateKey.from_private_bytes(rng.split(f"sign-{i}").bytes(32))
            for i in range(1, 6)}
    pks = {i: k.public_key().public_bytes_raw().hex() for i, k in keys.items()}
    endpoints = {i: f"127.0.0.1:{base_port + i - 1}" for i in range(1, 6)}
    deployment = Deployment((1 << 61) - 1, endpoints, pks)
    operators = {}
    for i in (1, 2, 3):
        operators[i] = VaultClient(f"i:{i}", keys[i], deployment,
                                   HttpChannel(endpoints), SeedStream(f"op{i}", "d"))
        operators[i].connect()
    if mode == "create":
        info = operators[1].survey_create(SCHEMA, 3, 1, [QUERY], survey_id=survey_id)
        pid = operators[1].propose("COMPUTE", info["policy_id"])
        for i in (1, 2, 3):
            operators[i].vote(pid)
        print(json.dumps({"survey_id": info["survey_id"], "proposal": pid}))
    else:
        result = operators[1].survey_compute(survey_id, "q")
        print(json.dumps(result))
    return 0


if __name__ == "__main__":
    sys.exit(main())
