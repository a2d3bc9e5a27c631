"""Socket servers in background threads, driven by the real CLI entry point."""

import json
import socket
import threading
import time
from pathlib import Path

import pytest

from quorumvault.cli import main as cli_main
from quorumvault.node.config import load_node_config
from quorumvault.node.server import NodeServer


def free_port_base() -> int:
    socks = []
    ports = []
    for _ in range(5):
        s = socket.socket()
        s.bind(("127.0.0.1", 0))
        socks.append(s)
        ports.append(s.getsockname()[1])
    for s in socks:
        s.close()
    return ports


@pytest.fixture(scope="module")
def deployment_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("deploy")
    ports = free_port_base()
    # gen-deployment assigns consecutive ports; patch the files afterwards
    assert cli_main(["admin", "gen-deployment", "--dir", str(out),
                     "--base-port", str(ports[0]), "--seed", "cli-test"]) == 0
    deployment = json.loads((out / "deployment.json").read_text())
    for i in range(1, 6):
        deployment["endpoints"][str(i)] = f"127.0.0.1:{ports[i - 1]}"
    (out / "deployment.json").write_text(json.dumps(deployment, sort_keys=True))
    for i in range(1, 6):
        conf = (out / f"node{i}.conf").read_text()
        fixed = []
        for line in conf.splitlines():
            if line.startswith("listen_address"):
                fixed.append(f"listen_address = 127.0.0.1:{ports[i - 1]}")
            else:
                fixed.append(line)
        (out / f"node{i}.conf").write_text("\n".join(fixed) + "\n")
    return out


@pytest.fixture(scope="module")
def cluster(deployment_dir):
    servers = []
    threads = []
    for i in range(1, 6):
        server = NodeServer(load_node_config(deployment_dir / f"node{i}.conf"))
        thread = threading.Thread(target=server.serve_forever, args=(0.05,), daemon=True)
        thread.start()
        servers.append(server)
        threads.append(thread)
    time.sleep(0.2)
    yield deployment_dir
    for server in servers:
        server.stop()
    time.sleep(0.2)
    for server in servers:
        try:
            server.close()
        except Exception:
            pass


@pytest.fixture(scope="module")
def alice_conf(cluster):
    out = cluster
    operator_conf = str(out / "operator1.conf")
    assert cli_main(["--config", operator_conf, "register", "--name", "alice",
                     "--dir", str(out), "--install"]) == 0
    conf = out / "alice.conf"
    conf.write_text(
        f"identity = u:alice\nkey_file = alice.key\nenc_key_file = alice.enc\n"
        f"deployment = deployment.json\ndefault_threshold = majority\n")
    return str(conf)


def run_cli(capsys, argv, stdin_text=None, monkeypatch=None):
    if stdin_text is not None:
        import io
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin_text))
    code = cli_main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_note_round_trip_over_sockets(alice_conf, capsys, monkeypatch):
    code, out, _ = run_cli(capsys, ["--config", alice_conf, "note", "create",
                                    "--threshold", "unanimity"],
                           stdin_text="x", monkeypatch=monkeypatch)
    assert code == 0
    note_id = out.strip()
    assert note_id.startswith("note-")
    code, out, _ = run_cli(capsys, ["--config", alice_conf, "note", "read", note_id])
    assert code == 0 and out.strip() == "x"


def test_gov_vote_flow_over_sockets(cluster, alice_conf, capsys, monkeypatch):
    code, out, _ = run_cli(capsys, ["--config", alice_conf, "--json", "note", "create"],
                           stdin_text="governed", monkeypatch=monkeypatch)
    note_id = json.loads(out)["note_id"]
    op1 = str(cluster / "operator1.conf")
    code, out, _ = run_cli(capsys, ["--config", op1, "--json", "gov", "propose",
                                    "--action", "RESTRICT", "--target", f"pol:{note_id}"])
    assert code == 0
    pid = json.loads(out)["proposal_id"]
    for i in (1, 2):
        code, out, _ = run_cli(capsys, ["--config", str(cluster / f"operator{i}.conf"),
                                        "gov", "vote", "--proposal", pid])
        assert code == 0 and out.strip() == "recorded"
    code, out, _ = run_cli(capsys, ["--config", str(cluster / "operator3.conf"),
                                    "gov", "vote", "--proposal", pid])
    assert code == 0 and out.strip() == "approved"
    code, out, _ = run_cli(capsys, ["--config", op1, "gov", "status", "--proposal", pid])
    assert code == 0 and "approved" in out
    # the restricted note can no longer be read, exit code 1 with the error name
    code, _, err = run_cli(capsys, ["--config", alice_conf, "note", "read", note_id])
    assert code == 1 and "Restricted" in err


def test_survey_too_few_respondents_exit_code(cluster, alice_conf, capsys, monkeypatch, tmp_path):
    op1 = str(cluster / "operator1.conf")
    schema_file = tmp_path / "schema.json"
    schema_file.write_text(json.dumps({"happy": {"type": "bool"}}))
    queries_file = tmp_path / "queries.json"
    queries_file.write_text(json.dumps(
        [{"query_id": "q1", "predicate": {"all": [{"attr": "happy"}]}}]))
    code, out, _ = run_cli(capsys, [
        "--config", op1, "--json", "survey", "create", "--schema", str(schema_file),
        "--queries", str(queries_file), "--min-respondents", "2"])
    assert code == 0
    info = json.loads(out)
    pid_code, pid_out, _ = run_cli(capsys, [
        "--config", op1, "--json", "gov", "propose", "--action", "COMPUTE",
        "--target", info["policy_id"]])
    pid = json.loads(pid_out)["proposal_id"]
    for i in (1, 2, 3):
        run_cli(capsys, ["--config", str(cluster / f"operator{i}.conf"),
                         "gov", "vote", "--proposal", pid])
    code, _, _ = run_cli(capsys, ["--config", alice_conf, "survey", "respond",
                                  info["survey_id"]],
                         stdin_text=json.dumps({"happy": 1}), monkeypatch=monkeypatch)
    assert code == 0
    code, _, err = run_cli(capsys, ["--config", alice_conf, "survey", "compute",
                                    info["survey_id"], "--query", "q1"])
    assert code == 1 and "TooFewRespondents" in err


def test_mail_over_sockets(cluster, alice_conf, capsys, monkeypatch):
    op1 = str(cluster / "operator1.conf")
    assert cli_main(["--config", op1, "register", "--name", "bob",
                     "--dir", str(cluster), "--install"]) == 0
    capsys.readouterr()
    (cluster / "bob.conf").write_text(
        "identity = u:bob\nkey_file = bob.key\nenc_key_file = bob.enc\n"
        "deployment = deployment.json\n")
    code, out, _ = run_cli(capsys, ["--config", alice_conf, "mail", "send",
                                    "--to", "bob"],
                           stdin_text="hi bob over tcp", monkeypatch=monkeypatch)
    assert code == 0 and out.strip().startswith("mail-")
    code, out, _ = run_cli(capsys, ["--config", str(cluster / "bob.conf"),
                                    "--json", "mail", "fetch"])
    assert code == 0
    inbox = json.loads(out)["inbox"]
    assert [m["body"] for m in inbox] == ["hi bob over tcp"]
