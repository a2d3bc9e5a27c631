"""Engine and session-hosting edge cases."""

import pytest

from quorumvault.errors import NotABit, RoundDesync, SessionLimit
from quorumvault.fields import Field
from quorumvault.harness.cluster import SimCluster
from quorumvault.mpc import LocalMpc, ValueRepr
from quorumvault.mpc.circuits import CircuitBuilder
from quorumvault.mpc.engine import GateMsg, NodeEngine
from quorumvault.rng import SeedStream

F31 = Field(31)


def mul_program():
    builder = CircuitBuilder(F31)
    builder.output("out", builder.mul(builder.input("a"), builder.input("b")))
    return builder.build()


def test_duplicate_contribution_rejected():
    program = mul_program()
    engine = NodeEngine("s", 1, F31, 3, 5, program, {"a": 5, "b": 6}, SeedStream("e1"))
    engine.start()
    gate = next(g.gid for g in program.gates if g.op == "mul")
    engine.receive(GateMsg("s", gate, 2, 7, dest=1))
    with pytest.raises(RoundDesync):
        engine.receive(GateMsg("s", gate, 2, 9, dest=1))


def test_contribution_for_local_gate_rejected():
    program = mul_program()
    engine = NodeEngine("s", 1, F31, 3, 5, program, {"a": 5, "b": 6}, SeedStream("e2"))
    engine.start()
    local = next(g.gid for g in program.gates if g.op == "input")
    with pytest.raises(RoundDesync):
        engine.receive(GateMsg("s", local, 2, 7, dest=1))


def test_open_bit_rejects_non_boolean():
    mpc = LocalMpc(F31, seed="nab")
    v = mpc.input(2, ValueRepr.INT_ONLY)
    with pytest.raises(NotABit):
        mpc.open_bit(v)
    assert mpc.open_bit(mpc.input(1, ValueRepr.INT_ONLY)) == 1


def test_node_session_limit(tmp_path):
    cluster = SimCluster(tmp_path, seed=71)
    node = cluster.nodes[1]
    program = mul_program()
    for i in range(64):
        node._start_mpc(f"s{i}", program, {"a": 1, "b": 2}, lambda n, e: [])
    with pytest.raises(SessionLimit):
        node._start_mpc("s64", program, {"a": 1, "b": 2}, lambda n, e: [])
    with pytest.raises(SessionLimit):
        node._start_mpc("s0", program, {"a": 1, "b": 2}, lambda n, e: [])  # duplicate id
