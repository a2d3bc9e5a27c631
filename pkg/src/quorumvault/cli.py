"""Command-line client and operator tool.

Secrets never ride argv: note and mail bodies come from stdin (or a file),
keys from files. Usage errors exit 2 (argparse), protocol errors exit 1
with the node error name on stderr; --json switches stdout to one
machine-readable document per invocation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey

from .client.api import VaultClient
from .client.socket_channel import SocketChannel
from .errors import NodeUnreachable, QuorumVaultError
from .governance import NODE_COUNT
from .node.config import Deployment, build_test_deployment, parse_kv
from .rng import SeedStream, system_stream


def load_client(config_path: str) -> VaultClient:
    root = Path(config_path).parent
    kv = parse_kv(Path(config_path).read_text())
    deployment = Deployment.from_json((root / kv["deployment"]).read_text())
    sign_key = Ed25519PrivateKey.from_private_bytes(
        bytes.fromhex((root / kv["key_file"]).read_text().strip()))
    enc_key = None
    if kv.get("enc_key_file") and (root / kv["enc_key_file"]).exists():
        enc_key = X25519PrivateKey.from_private_bytes(
            bytes.fromhex((root / kv["enc_key_file"]).read_text().strip()))
    seed = kv.get("seed")
    rng = SeedStream(seed, "cli") if seed else system_stream("cli")
    client = VaultClient(kv["identity"], sign_key, deployment,
                         SocketChannel(deployment), rng, enc_key)
    reachable = []
    for node in range(1, NODE_COUNT + 1):
        try:
            client.connect((node,))
            reachable.append(node)
        except (NodeUnreachable, QuorumVaultError):
            continue
    if not reachable:
        raise NodeUnreachable("no node reachable")
    return client


def _read_secret(args) -> str:
    if getattr(args, "file", None) and args.file != "-":
        return Path(args.file).read_text()
    return sys.stdin.read()


def _emit(args, human: str, doc: dict) -> None:
    print(json.dumps(doc, sort_keys=True) if args.json else human)


def _default_threshold(args, kv_path: str | None = None) -> str:
    if args.threshold:
        return args.threshold
    kv = parse_kv(Path(args.config).read_text())
    return kv.get("default_threshold", "majority")


def cmd_register(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = system_stream("register")
    sign_key = Ed25519PrivateKey.from_private_bytes(rng.bytes(32))
    enc_key = X25519PrivateKey.from_private_bytes(rng.bytes(32))
    (out / f"{args.name}.key").write_text(sign_key.private_bytes_raw().hex())
    (out / f"{args.name}.enc").write_text(enc_key.private_bytes_raw().hex())
    sign_pk = sign_key.public_key().public_bytes_raw().hex()
    enc_pk = enc_key.public_key().public_bytes_raw().hex()
    doc = {"user": args.name, "sign_pk": sign_pk, "enc_pk": enc_pk,
           "key_file": str(out / f"{args.name}.key"),
           "enc_key_file": str(out / f"{args.name}.enc")}
    if args.install:
        client = load_client(args.config)
        client.register_user(args.name, sign_pk, enc_pk)
        doc["installed"] = True
    _emit(args, json.dumps(doc, sort_keys=True), doc)
    return 0


def cmd_note(args) -> int:
    client = load_client(args.config)
    if args.action == "create":
        note_id = client.note_create(_read_secret(args), _default_threshold(args))
        _emit(args, note_id, {"note_id": note_id})
    elif args.action == "read":
        text = client.note_read(args.note_id)
        _emit(args, text, {"text": text})
    else:
        client.note_update(args.note_id, _read_secret(args))
        _emit(args, "updated", {"updated": args.note_id})
    return 0


def cmd_key(args) -> int:
    client = load_client(args.config)
    if args.action == "escrow":
        key = bytes.fromhex(_read_secret(args).strip())
        key_id = client.key_escrow(key, _default_threshold(args), args.label or "")
        _emit(args, key_id, {"key_id": key_id})
    elif args.action == "retrieve":
        key = client.key_retrieve(args.key_id)
        _emit(args, key.hex(), {"key": key.hex()})
    elif args.action == "encrypt":
        blob = Path(args.infile).read_bytes()
        sealed = client.encrypt_with_escrowed(args.key_id, blob)
        Path(args.outfile).write_bytes(sealed)
        _emit(args, f"wrote {args.outfile}", {"out": args.outfile, "bytes": len(sealed)})
    else:
        blob = Path(args.infile).read_bytes()
        plain = client.decrypt_with_escrowed(args.key_id, blob)
        Path(args.outfile).write_bytes(plain)
        _emit(args, f"wrote {args.outfile}", {"out": args.outfile, "bytes": len(plain)})
    return 0


def cmd_mail(args) -> int:
    client = load_client(args.config)
    if args.action == "send":
        email_id = client.email_send(args.to, _read_secret(args))
        _emit(args, email_id, {"email_id": email_id})
    else:
        mail = client.email_fetch()
        if args.json:
            print(json.dumps({"inbox": mail}, sort_keys=True))
        else:
            for m in mail:
                print(f"--- from {m['sender']} ({m['email_id']})")
                print(m["body"])
    return 0


def cmd_survey(args) -> int:
    client = load_client(args.config)
    if args.action == "create":
        schema = json.loads(Path(args.schema).read_text())
        queries = json.loads(Path(args.queries).read_text())
        info = client.survey_create(schema, args.survey_threshold,
                                    args.min_respondents, queries)
        _emit(args, f"{info['survey_id']} policy={info['policy_id']}", info)
    elif args.action == "respond":
        answers = json.loads(_read_secret(args))
        info = client.survey_info(args.survey_id)
        client.survey_respond(args.survey_id, info["schema"], answers)
        _emit(args, "accepted", {"accepted": True})
    elif args.action == "compute":
        result = client.survey_compute(args.survey_id, args.query, args.decision)
        human = f"count={result['numerator']}"
        if "percentage" in result:
            human += (f" denominator={result['denominator']}"
                      f" percentage={result['percentage']}%")
        _emit(args, human, result)
    else:
        results = client.survey_results(args.survey_id)
        _emit(args, "\n".join(json.dumps(r, sort_keys=True) for r in results),
              {"results": results})
    return 0


def cmd_gov(args) -> int:
    client = load_client(args.config)
    if args.action == "propose":
        pid = client.propose(args.gov_action, args.target, args.new_threshold or 0)
        _emit(args, pid, {"proposal_id": pid})
    elif args.action == "vote":
        decision = client.vote(args.proposal, approve=not args.reject)
        human = "recorded" if decision is None else \
            ("approved" if decision["approved"] else "denied")
        _emit(args, human, {"decision": decision})
    else:
        status = client.gov_status(args.proposal)
        if args.json:
            print(json.dumps(status, sort_keys=True))
        else:
            votes = {v["institution"]: v["choice"] for v in status["votes"]}
            decision = status["decision"]
            verdict = "open" if decision is None else \
                ("approved" if decision["approved"] else "denied")
            print(f"{status['proposal']['action']} {status['proposal']['target']}: "
                  f"{verdict} votes={votes}")
    return 0


def cmd_admin(args) -> int:
    if args.action == "gen-deployment":
        return _gen_deployment(args)
    client = load_client(args.config)
    if args.action == "recover":
        result = client.recover(args.record, args.lost, args.recover_threshold)
        _emit(args, f"recovered {result['recovered']}", result)
    elif args.action == "reshare":
        pid = client.propose("RETHRESHOLD", args.target, args.new_threshold)
        _emit(args, f"proposal {pid} (majority vote required)", {"proposal_id": pid})
    else:
        results = client.erase(args.record, args.decision)
        erased = {n: r for n, r in results.items() if not isinstance(r, Exception)}
        _emit(args, f"erased at {sorted(erased)}", {"erased_at": sorted(erased)})
    return 0


def _gen_deployment(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    seed = args.seed or system_stream("deploy").hex(8)
    deployment, configs = build_test_deployment(out, seed=seed, base_port=args.base_port)
    (out / "deployment.json").write_text(deployment.to_json())
    psk_lines = []
    seen = set()
    for config in configs:
        for (a, b), key in sorted(config.psks.items()):
            if (a, b) not in seen:
                seen.add((a, b))
                psk_lines.append(f"{a} {b} {key.hex()}")
    (out / "psks.txt").write_text("\n".join(psk_lines) + "\n")
    for config in configs:
        i = config.index
        (out / f"node{i}.key").write_text(config.sign_key.private_bytes_raw().hex())
        (out / f"node{i}.conf").write_text(
            f"index = {i}\ndeployment = deployment.json\nkey_file = node{i}.key\n"
            f"psk_file = psks.txt\ndata_dir = data{i}\n"
            f"listen_address = {config.listen_address}\nseed = {seed}-node\n")
        (out / f"operator{i}.conf").write_text(
            f"identity = i:{i}\nkey_file = node{i}.key\ndeployment = deployment.json\n")
    doc = {"dir": str(out), "nodes": NODE_COUNT,
           "endpoints": deployment.endpoints}
    print(json.dumps(doc, sort_keys=True) if args.json else
          f"deployment written to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quorumvault")
    parser.add_argument("--config", default="client.conf", help="client config file")
    parser.add_argument("--json", action="store_true", help="machine-readable output")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("register", help="generate (and optionally install) user keys")
    p.add_argument("--name", required=True)
    p.add_argument("--dir", default=".")
    p.add_argument("--install", action="store_true",
                   help="register at all nodes using the configured operator identity")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("note")
    p.add_argument("action", choices=["create", "read", "update"])
    p.add_argument("note_id", nargs="?")
    p.add_argument("file", nargs="?", default="-", help="text source, - for stdin")
    p.add_argument("--threshold")
    p.set_defaults(func=cmd_note)

    p = sub.add_parser("key")
    p.add_argument("action", choices=["escrow", "retrieve", "encrypt", "decrypt"])
    p.add_argument("key_id", nargs="?")
    p.add_argument("--threshold")
    p.add_argument("--label")
    p.add_argument("--file", default="-", help="key hex source, - for stdin")
    p.add_argument("--in", dest="infile")
    p.add_argument("--out", dest="outfile")
    p.set_defaults(func=cmd_key)

    p = sub.add_parser("mail")
    p.add_argument("action", choices=["send", "fetch"])
    p.add_argument("--to")
    p.add_argument("file", nargs="?", default="-")
    p.set_defaults(func=cmd_mail)

    p = sub.add_parser("survey")
    p.add_argument("action", choices=["create", "respond", "compute", "results"])
    p.add_argument("survey_id", nargs="?")
    p.add_argument("--schema")
    p.add_argument("--queries")
    p.add_argument("--survey-threshold", type=int, default=3)
    p.add_argument("--min-respondents", type=int, default=1)
    p.add_argument("--query")
    p.add_argument("--decision")
    p.add_argument("--file", default="-", help="answers JSON source")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("gov")
    p.add_argument("action", choices=["propose", "vote", "status"])
    p.add_argument("--action", dest="gov_action",
                   choices=["REVEAL", "COMPUTE", "RESTRICT", "UNRESTRICT",
                            "DISCARD", "RETHRESHOLD"])
    p.add_argument("--target")
    p.add_argument("--new-threshold", type=int)
    p.add_argument("--proposal")
    p.add_argument("--approve", action="store_true", default=True)
    p.add_argument("--reject", action="store_true")
    p.set_defaults(func=cmd_gov)

    p = sub.add_parser("admin")
    p.add_argument("action", choices=["recover", "reshare", "erase", "gen-deployment"])
    p.add_argument("--record")
    p.add_argument("--lost", type=int)
    p.add_argument("--threshold", dest="recover_threshold", type=int, default=3)
    p.add_argument("--target")
    p.add_argument("--new-threshold", type=int)
    p.add_argument("--decision")
    p.add_argument("--dir")
    p.add_argument("--base-port", type=int, default=7801)
    p.add_argument("--seed")
    p.set_defaults(func=cmd_admin)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except QuorumVaultError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
