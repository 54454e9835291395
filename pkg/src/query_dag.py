"""Query DAG language: node types, validation, normalization, CSE, pruning, wire format.

Node ids inside a QueryDag are dense integers (positions in `nodes`);
the string ids of the wire format survive as `labels` for diagnostics.
"""
import heapq
import json
import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Optional, Set, Tuple

from pydantic import ValidationError

from src.errors import (
    ArityViolation,
    CycleDetected,
    DagFormatError,
    DagSyntaxError,
    DanglingChild,
    DuplicateId,
    MissingRoot,
    UnknownKind,
)
from src.schemas import DagDocument, NodeSpec

logger = logging.getLogger(__name__)


class NodeKind(str, Enum):
    TERM = "term"
    AND = "and"
    OR = "or"
    NOT = "not"
    TRUE = "true"
    FALSE = "false"


LEAF_KINDS = frozenset({NodeKind.TERM, NodeKind.TRUE, NodeKind.FALSE})
COMMUTATIVE_KINDS = frozenset({NodeKind.AND, NodeKind.OR})


@dataclass(frozen=True)
class QueryNode:
    kind: NodeKind
    children: Tuple[int, ...] = ()
    term: Optional[str] = None

    @classmethod
    def leaf(cls, term: str) -> "QueryNode":
        return cls(NodeKind.TERM, (), term)


@dataclass(frozen=True)
class QueryDag:
    nodes: Tuple[QueryNode, ...]
    root: int
    labels: Tuple[str, ...] = ()

    def __len__(self) -> int:
        return len(self.nodes)

    def label(self, node_id: int) -> str:
        if 0 <= node_id < len(self.labels):
            return self.labels[node_id]
        return f"n{node_id}"


# A NormalizedDag is a QueryDag whose AND/OR nodes all have exactly two children.
NormalizedDag = QueryDag


class _NodeStore:
    """Append-only node list used by the dag transformations."""

    def __init__(self):
        self.nodes: List[QueryNode] = []
        self.labels: List[str] = []

    def add(self, node: QueryNode, label: str) -> int:
        self.nodes.append(node)
        self.labels.append(label)
        return len(self.nodes) - 1

    def freeze(self, root: int) -> QueryDag:
        return QueryDag(tuple(self.nodes), root, tuple(self.labels))


# --- traversal -------------------------------------------------------------


def reachable(dag: QueryDag) -> Set[int]:
    """Node ids reachable from the root (cycle-tolerant)."""
    seen: Set[int] = set()
    stack = [dag.root]
    while stack:
        node_id = stack.pop()
        if node_id in seen or not 0 <= node_id < len(dag.nodes):
            continue
        seen.add(node_id)
        stack.extend(dag.nodes[node_id].children)
    return seen


def _find_cycle(dag: QueryDag, candidates: Set[int]) -> List[str]:
    """Return the labels along one cycle among `candidates`."""
    state: Dict[int, int] = {}  # 1 = on stack, 2 = done
    for start in sorted(candidates):
        if start in state:
            continue
        path = [start]
        iters = [iter(dag.nodes[start].children)]
        state[start] = 1
        while iters:
            child = next(iters[-1], None)
            if child is None:
                state[path.pop()] = 2
                iters.pop()
                continue
            if child not in candidates:
                continue
            if state.get(child) == 1:
                cycle = path[path.index(child):] + [child]
                return [dag.label(n) for n in cycle]
            if child not in state:
                state[child] = 1
                path.append(child)
                iters.append(iter(dag.nodes[child].children))
    return [dag.label(n) for n in sorted(candidates)]


def topological_order(dag: QueryDag, reachable_only: bool = True) -> List[int]:
    """Children before parents; ties broken by smallest node id.

    Raises:
        CycleDetected: if the considered nodes contain a cycle.
    """
    members = reachable(dag) if reachable_only else set(range(len(dag.nodes)))
    pending: Dict[int, int] = {}
    parents: Dict[int, List[int]] = {n: [] for n in members}
    for node_id in members:
        children = [c for c in dag.nodes[node_id].children if c in members]
        pending[node_id] = len(children)
        for child in children:
            parents[child].append(node_id)

    ready = [n for n, count in pending.items() if count == 0]
    heapq.heapify(ready)
    order: List[int] = []
    while ready:
        node_id = heapq.heappop(ready)
        order.append(node_id)
        for parent in parents[node_id]:
            pending[parent] -= 1
            if pending[parent] == 0:
                heapq.heappush(ready, parent)

    if len(order) < len(members):
        raise CycleDetected(_find_cycle(dag, members - set(order)))
    return order


def topo_order(dag: QueryDag) -> List[int]:
    """Evaluation order of the nodes reachable from the root."""
    return topological_order(dag, reachable_only=True)


def post_order(dag: QueryDag) -> List[int]:
    """Depth-first post-order from the root; depends only on structure and child order."""
    order: List[int] = []
    seen: Set[int] = set()
    starts = [dag.root] + [n for n in range(len(dag.nodes)) if n != dag.root]
    for start in starts:
        if start in seen:
            continue
        seen.add(start)
        stack = [(start, iter(dag.nodes[start].children))]
        while stack:
            node_id, children = stack[-1]
            child = next(children, None)
            if child is None:
                order.append(node_id)
                stack.pop()
            elif child not in seen:
                seen.add(child)
                stack.append((child, iter(dag.nodes[child].children)))
    return order


# --- validation ------------------------------------------------------------


def validate(dag: QueryDag) -> None:
    """Raise a DagValidationError unless the dag is well-formed and acyclic."""
    if not 0 <= dag.root < len(dag.nodes):
        raise MissingRoot(dag.label(dag.root))
    for node_id, node in enumerate(dag.nodes):
        arity = len(node.children)
        if node.kind in LEAF_KINDS and arity != 0:
            raise ArityViolation(dag.label(node_id), node.kind.value, arity)
        if node.kind is NodeKind.NOT and arity != 1:
            raise ArityViolation(dag.label(node_id), node.kind.value, arity)
        if node.kind is NodeKind.TERM and not node.term:
            raise ArityViolation(dag.label(node_id), "term without a term string", 0)
        for child in node.children:
            if not 0 <= child < len(dag.nodes):
                raise DanglingChild(dag.label(node_id), f"n{child}")
    topological_order(dag, reachable_only=False)


def is_normalized(dag: QueryDag) -> bool:
    return all(
        len(node.children) == 2 for node in dag.nodes if node.kind in COMMUTATIVE_KINDS
    )


# --- transformations -------------------------------------------------------


def normalize(dag: QueryDag) -> NormalizedDag:
    """Rewrite every AND/OR to exactly two children.

    k-ary nodes become left-leaning chains, unary ones collapse onto their
    child, empty AND is TRUE and empty OR is FALSE.
    """
    validate(dag)
    store = _NodeStore()
    mapping: Dict[int, int] = {}
    for old_id in topological_order(dag, reachable_only=False):
        node = dag.nodes[old_id]
        label = dag.label(old_id)
        if node.kind in LEAF_KINDS:
            mapping[old_id] = store.add(node, label)
        elif node.kind is NodeKind.NOT:
            mapping[old_id] = store.add(QueryNode(NodeKind.NOT, (mapping[node.children[0]],)), label)
        else:
            kids = [mapping[c] for c in node.children]
            if not kids:
                constant = NodeKind.TRUE if node.kind is NodeKind.AND else NodeKind.FALSE
                mapping[old_id] = store.add(QueryNode(constant), label)
            elif len(kids) == 1:
                mapping[old_id] = kids[0]
            else:
                acc = kids[0]
                for step, kid in enumerate(kids[1:], start=1):
                    step_label = label if step == len(kids) - 1 else f"{label}~{step}"
                    acc = store.add(QueryNode(node.kind, (acc, kid)), step_label)
                mapping[old_id] = acc
    return store.freeze(mapping[dag.root])


def _cse_key(node: QueryNode, children: Tuple[int, ...]) -> tuple:
    return (node.kind, node.term, children)


def cse(dag: QueryDag) -> QueryDag:
    """Merge structurally identical nodes; AND/OR children compare as sets of ids."""
    validate(dag)
    store = _NodeStore()
    table: Dict[tuple, int] = {}
    mapping: Dict[int, int] = {}
    for old_id in topological_order(dag, reachable_only=False):
        node = dag.nodes[old_id]
        children = tuple(mapping[c] for c in node.children)
        if node.kind in COMMUTATIVE_KINDS:
            children = tuple(sorted(children))
        key = _cse_key(node, children)
        if key not in table:
            table[key] = store.add(QueryNode(node.kind, children, node.term), dag.label(old_id))
        mapping[old_id] = table[key]
    merged = store.freeze(mapping[dag.root])
    if len(merged) < len(dag):
        logger.debug("cse merged %d nodes", len(dag) - len(merged))
    return merged


def prune(dag: QueryDag) -> QueryDag:
    """Drop nodes unreachable from the root, keeping relative id order."""
    keep = sorted(reachable(dag))
    if len(keep) == len(dag.nodes):
        return dag
    renumber = {old: new for new, old in enumerate(keep)}
    nodes = tuple(
        QueryNode(dag.nodes[old].kind, tuple(renumber[c] for c in dag.nodes[old].children), dag.nodes[old].term)
        for old in keep
    )
    labels = tuple(dag.label(old) for old in keep)
    return QueryDag(nodes, renumber[dag.root], labels)


def prepare(dag: QueryDag) -> NormalizedDag:
    """The evaluator's input form: normalized, maximally shared, pruned."""
    return prune(cse(normalize(dag)))


def canonical_form(dag: QueryDag) -> Tuple[tuple, ...]:
    """Reachable structure renumbered by post-order, for equality modulo node ids."""
    live = reachable(dag)
    order = [n for n in post_order(dag) if n in live]
    position = {node_id: i for i, node_id in enumerate(order)}
    return tuple(
        (dag.nodes[n].kind.value, dag.nodes[n].term, tuple(position[c] for c in dag.nodes[n].children))
        for n in order
    )


def structurally_equal(a: QueryDag, b: QueryDag) -> bool:
    return canonical_form(a) == canonical_form(b)


# --- wire format -----------------------------------------------------------


def dag_from_document(doc: DagDocument) -> QueryDag:
    """Convert a validated wire document into a QueryDag."""
    ids: Dict[str, int] = {}
    for spec in doc.nodes:
        if spec.id in ids:
            raise DuplicateId(spec.id)
        ids[spec.id] = len(ids)

    nodes: List[QueryNode] = []
    for spec in doc.nodes:
        try:
            kind = NodeKind(spec.kind)
        except ValueError:
            raise UnknownKind(spec.id, spec.kind) from None
        if kind is NodeKind.TERM and not spec.term:
            raise DagFormatError(f"node {spec.id}: term node needs a non-empty 'term'")
        if kind is not NodeKind.TERM and spec.term is not None:
            raise DagFormatError(f"node {spec.id}: only term nodes carry 'term'")
        children = []
        for child in spec.children:
            if child not in ids:
                raise DanglingChild(spec.id, child)
            children.append(ids[child])
        nodes.append(QueryNode(kind, tuple(children), spec.term))

    if doc.root not in ids:
        raise MissingRoot(doc.root)
    dag = QueryDag(tuple(nodes), ids[doc.root], tuple(spec.id for spec in doc.nodes))
    validate(dag)
    return dag


def dag_from_dict(data) -> QueryDag:
    try:
        doc = DagDocument.model_validate(data)
    except ValidationError as e:
        raise DagFormatError(f"invalid dag document: {e.errors()[0]['msg']} at {e.errors()[0]['loc']}") from e
    return dag_from_document(doc)


def parse_dag(text: str) -> QueryDag:
    """Parse the JSON wire format into a validated QueryDag."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise DagSyntaxError(e.msg, e.lineno, e.colno) from e
    return dag_from_dict(data)


def _wire_ids(dag: QueryDag) -> List[str]:
    labels = [dag.label(i) for i in range(len(dag.nodes))]
    if len(set(labels)) == len(labels):
        return labels
    return [f"n{i}" for i in range(len(dag.nodes))]


def dag_to_dict(dag: QueryDag) -> dict:
    """Wire document with nodes in children-before-parents order."""
    ids = _wire_ids(dag)
    nodes = []
    for node_id in post_order(dag):
        node = dag.nodes[node_id]
        entry = {"id": ids[node_id], "kind": node.kind.value}
        if node.kind is NodeKind.TERM:
            entry["term"] = node.term
        if node.children:
            entry["children"] = [ids[c] for c in node.children]
        nodes.append(entry)
    return {"root": ids[dag.root], "nodes": nodes}


def serialize_dag(dag: QueryDag, indent: Optional[int] = None) -> str:
    return json.dumps(dag_to_dict(dag), indent=indent)


def leaf_terms(dag: QueryDag, nodes: Optional[Iterable[int]] = None) -> List[str]:
    """Distinct TERM labels among `nodes` (default: reachable nodes), sorted."""
    members = reachable(dag) if nodes is None else nodes
    return sorted({dag.nodes[n].term for n in members if dag.nodes[n].kind is NodeKind.TERM})
