"""Reference evaluators and the circuit-value reduction.

These exist to be compared against compute_pn: a per-document oracle, a
naive term-at-a-time evaluator that materializes absolute sets, a
tree-unrolled evaluator standing in for iterator (DAAT) engines, and the
reduction from Boolean circuits to single-document retrieval.
"""
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import ValidationError

from src.config import SETTINGS
from src.errors import ExpansionLimitExceeded, InvalidCircuit, NotATree, WorkLimitExceeded
from src.index import DOC_DTYPE, InvertedIndex, PostingList, build_index, freeze
from src.pn_algebra import CostCounters, complement, set_intersect, set_union
from src.query_dag import NodeKind, QueryDag, QueryNode, reachable, topo_order, validate
from src.schemas import CircuitDocument

logger = logging.getLogger(__name__)

CVP_TOKEN = "TRUE"


@dataclass
class BaselineResult:
    docs: PostingList
    counters: CostCounters


@dataclass(frozen=True)
class UnrolledTree:
    tree: QueryDag
    node_count: int


# --- per-document oracle ---------------------------------------------------


def eval_oracle(dag: QueryDag, index: InvertedIndex) -> PostingList:
    """{d in U : root is true at d}, straight from the set semantics.

    Each node's truth value is memoized per document; all documents are
    evaluated together as one boolean column per node.
    """
    validate(dag)
    universe = index.universe_size
    truth: Dict[int, np.ndarray] = {}
    for node_id in topo_order(dag):
        node = dag.nodes[node_id]
        if node.kind is NodeKind.TERM:
            column = np.zeros(universe, dtype=bool)
            column[index.lookup(node.term)] = True
        elif node.kind is NodeKind.TRUE:
            column = np.ones(universe, dtype=bool)
        elif node.kind is NodeKind.FALSE:
            column = np.zeros(universe, dtype=bool)
        elif node.kind is NodeKind.NOT:
            column = ~truth[node.children[0]]
        elif node.kind is NodeKind.AND:
            column = np.ones(universe, dtype=bool)
            for child in node.children:
                column &= truth[child]
        else:
            column = np.zeros(universe, dtype=bool)
            for child in node.children:
                column |= truth[child]
        truth[node_id] = column
    return freeze(np.flatnonzero(truth[dag.root]).astype(DOC_DTYPE))


# --- naive TAAT ------------------------------------------------------------


def _absolute_node(
    node: QueryNode,
    child_sets: List[PostingList],
    index: InvertedIndex,
    counters: CostCounters,
) -> PostingList:
    """One node's absolute set; negation and TRUE pay a full universe scan."""
    universe = index.universe_size
    if node.kind is NodeKind.TERM:
        return index.lookup(node.term)
    if node.kind is NodeKind.FALSE:
        return freeze(np.empty(0, dtype=DOC_DTYPE))
    if node.kind is NodeKind.TRUE or (node.kind is NodeKind.AND and not child_sets):
        counters.touch(universe)
        return freeze(np.arange(universe, dtype=DOC_DTYPE))
    if node.kind is NodeKind.NOT:
        counters.touch(universe)
        return complement(child_sets[0], universe)
    if node.kind is NodeKind.OR and not child_sets:
        return freeze(np.empty(0, dtype=DOC_DTYPE))
    merge = set_intersect if node.kind is NodeKind.AND else set_union
    acc = child_sets[0]
    for docs in child_sets[1:]:
        acc = merge(acc, docs, counters)
    return acc


def eval_naive_taat(dag: QueryDag, index: InvertedIndex) -> BaselineResult:
    """Bottom-up, one absolute set per node."""
    validate(dag)
    counters = CostCounters()
    sets: Dict[int, PostingList] = {}
    for node_id in topo_order(dag):
        node = dag.nodes[node_id]
        sets[node_id] = _absolute_node(node, [sets[c] for c in node.children], index, counters)
        counters.node_visits += 1
        counters.observe(sets[node_id].size)
    return BaselineResult(sets[dag.root], counters)


# --- tree expansion --------------------------------------------------------


def unrolled_size(dag: QueryDag) -> int:
    """Node count of the tree obtained by copying every shared node per parent."""
    size: Dict[int, int] = {}
    for node_id in topo_order(dag):
        size[node_id] = 1 + sum(size[c] for c in dag.nodes[node_id].children)
    return size[dag.root]


def unroll_to_tree(dag: QueryDag, limit: Optional[int] = None) -> UnrolledTree:
    """Duplicate shared nodes so every node has one parent.

    Raises:
        ExpansionLimitExceeded: when the tree would exceed `limit` nodes; the
            exact count is computed first and carried on the exception.
    """
    validate(dag)
    limit = SETTINGS.expansion_limit if limit is None else limit
    count = unrolled_size(dag)
    if count > limit:
        raise ExpansionLimitExceeded(count, limit)

    nodes: List[QueryNode] = []
    labels: List[str] = []
    root = 0
    stack: List[Tuple[int, List[int]]] = [(dag.root, [])]
    while stack:
        node_id, done = stack[-1]
        children = dag.nodes[node_id].children
        if len(done) < len(children):
            stack.append((children[len(done)], []))
            continue
        stack.pop()
        old = dag.nodes[node_id]
        new_id = len(nodes)
        nodes.append(QueryNode(old.kind, tuple(done), old.term))
        labels.append(f"{dag.label(node_id)}#{new_id}")
        if stack:
            stack[-1][1].append(new_id)
        else:
            root = new_id
    logger.debug("unrolled %d dag nodes into %d tree nodes", len(reachable(dag)), count)
    return UnrolledTree(QueryDag(tuple(nodes), root, tuple(labels)), count)


def _check_tree(tree: QueryDag) -> None:
    parent_edges: Dict[int, int] = {}
    for node_id in reachable(tree):
        for child in tree.nodes[node_id].children:
            parent_edges[child] = parent_edges.get(child, 0) + 1
            if parent_edges[child] > 1:
                raise NotATree(tree.label(child))


def eval_tree_iterative(
    tree: QueryDag,
    index: InvertedIndex,
    work_limit: Optional[int] = None,
) -> BaselineResult:
    """Simulated DAAT: memo-free evaluation of a tree, negation by full complement.

    Work (element touches plus node visits) is checked after every node.

    Raises:
        NotATree: if some node has more than one parent.
        WorkLimitExceeded: once work passes `work_limit`.
    """
    validate(tree)
    _check_tree(tree)
    limit = SETTINGS.tree_work_limit if work_limit is None else work_limit
    counters = CostCounters()

    stack: List[Tuple[int, List[PostingList]]] = [(tree.root, [])]
    result: Optional[PostingList] = None
    while stack:
        node_id, done = stack[-1]
        children = tree.nodes[node_id].children
        if len(done) < len(children):
            stack.append((children[len(done)], []))
            continue
        stack.pop()
        docs = _absolute_node(tree.nodes[node_id], done, index, counters)
        counters.node_visits += 1
        counters.observe(docs.size)
        work = counters.element_touches + counters.node_visits
        if work > limit:
            raise WorkLimitExceeded(work, limit)
        if stack:
            stack[-1][1].append(docs)
        else:
            result = docs
    return BaselineResult(result, counters)


# --- circuit value problem -------------------------------------------------


class GateKind(str, Enum):
    INPUT = "input"
    AND = "and"
    OR = "or"
    NOT = "not"


@dataclass(frozen=True)
class Gate:
    id: str
    kind: GateKind
    operands: Tuple[str, ...] = ()
    value: Optional[bool] = None


@dataclass(frozen=True)
class CircuitInstance:
    """Gates listed so that operands always precede their use."""

    gates: Tuple[Gate, ...]
    output: str

    def validate(self) -> None:
        seen = set()
        for gate in self.gates:
            if gate.id in seen:
                raise InvalidCircuit(f"duplicate gate id {gate.id}")
            if gate.kind is GateKind.INPUT:
                if gate.operands or gate.value is None:
                    raise InvalidCircuit(f"input {gate.id} needs a value and no operands")
            elif gate.kind is GateKind.NOT and len(gate.operands) != 1:
                raise InvalidCircuit(f"NOT gate {gate.id} needs exactly one operand")
            elif gate.kind in (GateKind.AND, GateKind.OR) and not gate.operands:
                raise InvalidCircuit(f"gate {gate.id} has no operands")
            for operand in gate.operands:
                if operand not in seen:
                    raise InvalidCircuit(f"gate {gate.id} uses {operand} before it is defined")
            seen.add(gate.id)
        if self.output not in seen:
            raise InvalidCircuit(f"output {self.output} is not a gate")


def simulate_circuit(circuit: CircuitInstance) -> bool:
    """Direct evaluation of the gates in order."""
    circuit.validate()
    values: Dict[str, bool] = {}
    for gate in circuit.gates:
        inputs = [values[o] for o in gate.operands]
        if gate.kind is GateKind.INPUT:
            values[gate.id] = bool(gate.value)
        elif gate.kind is GateKind.NOT:
            values[gate.id] = not inputs[0]
        elif gate.kind is GateKind.AND:
            values[gate.id] = all(inputs)
        else:
            values[gate.id] = any(inputs)
    return values[circuit.output]


def cvp_reduce(circuit: CircuitInstance) -> Tuple[InvertedIndex, QueryDag]:
    """Single-document index plus a dag retrieving that document iff the circuit is true.

    TRUE inputs become the leaf 'TRUE'; FALSE inputs become NOT('TRUE').
    """
    circuit.validate()
    index = build_index([(0, [CVP_TOKEN])])
    nodes: List[QueryNode] = []
    labels: List[str] = []
    ids: Dict[str, int] = {}

    def add(node: QueryNode, label: str) -> int:
        nodes.append(node)
        labels.append(label)
        return len(nodes) - 1

    for gate in circuit.gates:
        if gate.kind is GateKind.INPUT:
            if gate.value:
                ids[gate.id] = add(QueryNode.leaf(CVP_TOKEN), gate.id)
            else:
                leaf = add(QueryNode.leaf(CVP_TOKEN), f"{gate.id}.{CVP_TOKEN}")
                ids[gate.id] = add(QueryNode(NodeKind.NOT, (leaf,)), gate.id)
        else:
            kind = NodeKind(gate.kind.value)
            ids[gate.id] = add(QueryNode(kind, tuple(ids[o] for o in gate.operands)), gate.id)
    return index, QueryDag(tuple(nodes), ids[circuit.output], tuple(labels))


def circuit_from_dict(data) -> CircuitInstance:
    try:
        doc = CircuitDocument.model_validate(data)
    except ValidationError as e:
        raise InvalidCircuit(f"invalid circuit document: {e.errors()[0]['msg']}") from e
    gates = []
    for spec in doc.nodes:
        try:
            kind = GateKind(spec.kind)
        except ValueError:
            raise InvalidCircuit(f"gate {spec.id}: unknown kind {spec.kind!r}") from None
        gates.append(Gate(spec.id, kind, tuple(spec.children), spec.value))
    circuit = CircuitInstance(tuple(gates), doc.root)
    circuit.validate()
    return circuit


def parse_circuit(text: str) -> CircuitInstance:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise InvalidCircuit(f"line {e.lineno}, column {e.colno}: {e.msg}") from e
    return circuit_from_dict(data)


def serialize_circuit(circuit: CircuitInstance) -> str:
    nodes = []
    for gate in circuit.gates:
        entry = {"id": gate.id, "kind": gate.kind.value}
        if gate.kind is GateKind.INPUT:
            entry["value"] = gate.value
        else:
            entry["children"] = list(gate.operands)
        nodes.append(entry)
    return json.dumps({"root": circuit.output, "nodes": nodes})
