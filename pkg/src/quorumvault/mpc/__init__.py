"""Honest-majority secure computation over secret-shared values.

Linear operations are node-local; each multiplication costs one interactive
round (local share product, fresh degree-t resharing, interpolation-weighted
recombination). Values carry an integer sharing, a bitwise sharing, or both;
the dual form enables public-threshold comparisons while the integer form
keeps sums and counts cheap.
"""

from .circuits import CircuitBuilder, CircuitStats, Program, compile_predicate
from .engine import GateMsg, NodeEngine
from .simulator import LocalMpc
from .values import SharedValue, ValueRepr, bits_of, int_of_bits

__all__ = [
    "CircuitBuilder",
    "CircuitStats",
    "GateMsg",
    "LocalMpc",
    "NodeEngine",
    "Program",
    "SharedValue",
    "ValueRepr",
    "bits_of",
    "compile_predicate",
    "int_of_bits",
]
