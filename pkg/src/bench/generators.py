"""Seeded random instances for property tests and experiments."""
from typing import List, Optional, Sequence

import numpy as np

from src.baselines import CircuitInstance, Gate, GateKind
from src.circuit_compiler import DagBuilder, gate_xor
from src.index import DOC_DTYPE, InvertedIndex, freeze
from src.query_dag import NodeKind, QueryDag, QueryNode

# Mixed so that both sparse and dense (adaptive-flip) leaves show up
DENSITIES = (0.01, 0.05, 0.2, 0.5, 0.8, 0.95)


def random_index(
    rng: np.random.Generator,
    universe_size: int = 200,
    n_terms: int = 20,
    densities: Sequence[float] = DENSITIES,
) -> InvertedIndex:
    postings = {}
    for i in range(n_terms):
        density = densities[int(rng.integers(len(densities)))]
        docs = np.flatnonzero(rng.random(universe_size) < density).astype(DOC_DTYPE)
        if docs.size:
            postings[f"t{i}"] = freeze(docs)
    return InvertedIndex(universe_size=universe_size, postings=postings)


def random_dag(
    rng: np.random.Generator,
    terms: Sequence[str],
    max_nodes: int = 30,
    constant_rate: float = 0.03,
    max_arity: int = 2,
) -> QueryDag:
    """AND/OR and unary NOT over earlier nodes so sub-expressions get shared.

    With the default `max_arity` every AND/OR is binary; above it they take
    0..max_arity children, so unary and empty operators show up too. Some
    terms may be absent from the index; some nodes may be unreachable.
    """
    n = int(rng.integers(1, max_nodes + 1))
    nodes: List[QueryNode] = []
    for i in range(n):
        roll = rng.random()
        if i == 0 or roll < 0.25:
            if rng.random() < constant_rate:
                nodes.append(QueryNode(NodeKind.TRUE if rng.random() < 0.5 else NodeKind.FALSE))
            else:
                nodes.append(QueryNode.leaf(terms[int(rng.integers(len(terms)))]))
        elif roll < 0.45:
            nodes.append(QueryNode(NodeKind.NOT, (int(rng.integers(i)),)))
        else:
            kind = NodeKind.AND if rng.random() < 0.5 else NodeKind.OR
            arity = 2 if max_arity == 2 else int(rng.integers(max_arity + 1))
            nodes.append(QueryNode(kind, tuple(int(rng.integers(i)) for _ in range(arity))))
    return QueryDag(tuple(nodes), n - 1)


def random_circuit(rng: np.random.Generator, max_gates: int = 40) -> CircuitInstance:
    n_gates = int(rng.integers(1, max_gates + 1))
    n_inputs = min(n_gates, int(rng.integers(1, 7)))
    gates: List[Gate] = []
    for i in range(n_inputs):
        gates.append(Gate(f"in{i}", GateKind.INPUT, value=bool(rng.random() < 0.5)))
    for i in range(n_inputs, n_gates):
        roll = rng.random()
        if roll < 0.25:
            gates.append(Gate(f"g{i}", GateKind.NOT, (gates[int(rng.integers(i))].id,)))
        else:
            kind = GateKind.AND if roll < 0.625 else GateKind.OR
            operands = (gates[int(rng.integers(i))].id, gates[int(rng.integers(i))].id)
            gates.append(Gate(f"g{i}", kind, operands))
    return CircuitInstance(tuple(gates), gates[-1].id)


def xor_terms(depth: int) -> List[str]:
    return [f"x{i}" for i in range(depth + 1)]


def xor_chain(depth: int, terms: Optional[Sequence[str]] = None) -> QueryDag:
    """x0 XOR x1 XOR ... XOR x_depth, each step reusing the previous result twice.

    The dag grows by a constant number of nodes per step while the equivalent
    tree doubles.
    """
    terms = list(terms) if terms is not None else xor_terms(depth)
    b = DagBuilder(fold_constants=False)
    acc = b.term(terms[0])
    for term in terms[1 : depth + 1]:
        acc = gate_xor(b, acc, b.term(term))
    return b.build(acc)


def sparse_postings(rng: np.random.Generator, universe_size: int, size: int) -> np.ndarray:
    """`size` distinct documents drawn uniformly from the universe."""
    return freeze(np.sort(rng.choice(universe_size, size=size, replace=False)).astype(DOC_DTYPE))
