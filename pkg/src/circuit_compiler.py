"""Lowering of arithmetic and threshold constraints to Boolean query dags.

Numbers live as BitVecs: one dag node per bit, least significant first. A
document's value of a BitVec is the sum of 2^i over the bits whose node
retrieves it, so every gadget computes a per-document integer function
using only AND, OR and NOT.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from src.config import SETTINGS
from src.errors import CircuitOverflowError, CircuitWidthError, ConstraintError, UnknownNode
from src.query_dag import COMMUTATIVE_KINDS, NodeKind, QueryDag, QueryNode, prune, topo_order

logger = logging.getLogger(__name__)

MAX_WEIGHT = 1 << 30


@dataclass(frozen=True)
class BitVec:
    bits: Tuple[int, ...]

    @property
    def width(self) -> int:
        return len(self.bits)


@dataclass(frozen=True)
class WeightedTerm:
    term: str
    weight: int

    def __post_init__(self):
        if not self.term:
            raise ConstraintError("weighted term needs a non-empty term")
        if not 1 <= self.weight < MAX_WEIGHT:
            raise ConstraintError(f"weight of {self.term!r} must be in [1, 2^30), got {self.weight}")


class DagBuilder:
    """Hash-consing node store: asking twice for the same node returns the same id.

    Children are always created before their parents, so the store is
    acyclic by construction. With `fold_constants` the builder also applies
    the Boolean identities for TRUE/FALSE, double negation and x op x.
    """

    def __init__(self, fold_constants: bool = True, max_sum_width: Optional[int] = None):
        self.fold_constants = fold_constants
        self.max_sum_width = max_sum_width or SETTINGS.max_sum_width
        self._nodes: List[QueryNode] = []
        self._labels: List[str] = []
        self._table: Dict[tuple, int] = {}

    def __len__(self) -> int:
        return len(self._nodes)

    def node(self, node_id: int) -> QueryNode:
        self._check(node_id)
        return self._nodes[node_id]

    def _check(self, *node_ids: int) -> None:
        for node_id in node_ids:
            if not 0 <= node_id < len(self._nodes):
                raise UnknownNode(node_id)

    def _intern(self, kind: NodeKind, children: Tuple[int, ...] = (), term: Optional[str] = None) -> int:
        if kind in COMMUTATIVE_KINDS:
            children = tuple(sorted(children))
        key = (kind, term, children)
        node_id = self._table.get(key)
        if node_id is None:
            node_id = len(self._nodes)
            self._nodes.append(QueryNode(kind, children, term))
            self._labels.append(f"t:{term}" if kind is NodeKind.TERM else f"{kind.value}{node_id}")
            self._table[key] = node_id
        return node_id

    # --- primitives --------------------------------------------------------

    def true(self) -> int:
        return self._intern(NodeKind.TRUE)

    def false(self) -> int:
        return self._intern(NodeKind.FALSE)

    def const(self, value: bool) -> int:
        return self.true() if value else self.false()

    def term(self, term: str) -> int:
        if not term:
            raise ConstraintError("term must be a non-empty string")
        return self._intern(NodeKind.TERM, (), term)

    def is_true(self, node_id: int) -> bool:
        return self._nodes[node_id].kind is NodeKind.TRUE

    def is_false(self, node_id: int) -> bool:
        return self._nodes[node_id].kind is NodeKind.FALSE

    def _negates(self, a: int, c: int) -> bool:
        node_a, node_c = self._nodes[a], self._nodes[c]
        return (node_a.kind is NodeKind.NOT and node_a.children[0] == c) or (
            node_c.kind is NodeKind.NOT and node_c.children[0] == a
        )

    def not_(self, a: int) -> int:
        self._check(a)
        if self.fold_constants:
            node = self._nodes[a]
            if node.kind is NodeKind.TRUE:
                return self.false()
            if node.kind is NodeKind.FALSE:
                return self.true()
            if node.kind is NodeKind.NOT:
                return node.children[0]
        return self._intern(NodeKind.NOT, (a,))

    def and_(self, a: int, c: int) -> int:
        self._check(a, c)
        if self.fold_constants:
            if self.is_false(a) or self.is_false(c) or self._negates(a, c):
                return self.false()
            if self.is_true(a) or a == c:
                return c
            if self.is_true(c):
                return a
        return self._intern(NodeKind.AND, (a, c))

    def or_(self, a: int, c: int) -> int:
        self._check(a, c)
        if self.fold_constants:
            if self.is_true(a) or self.is_true(c) or self._negates(a, c):
                return self.true()
            if self.is_false(a) or a == c:
                return c
            if self.is_false(c):
                return a
        return self._intern(NodeKind.OR, (a, c))

    def and_all(self, node_ids: Sequence[int]) -> int:
        acc = self.true()
        for node_id in node_ids:
            acc = node_id if self.is_true(acc) else self.and_(acc, node_id)
        return acc

    def or_all(self, node_ids: Sequence[int]) -> int:
        acc = self.false()
        for node_id in node_ids:
            acc = node_id if self.is_false(acc) else self.or_(acc, node_id)
        return acc

    # --- output ------------------------------------------------------------

    def to_dag(self, root: int) -> QueryDag:
        """Everything built so far, rooted at `root` (dead nodes included)."""
        self._check(root)
        return QueryDag(tuple(self._nodes), root, tuple(self._labels))

    def build(self, root: int) -> QueryDag:
        """Only the nodes `root` depends on."""
        return prune(self.to_dag(root))


def import_dag(b: DagBuilder, dag: QueryDag) -> int:
    """Copy a query dag into the builder (k-ary nodes folded into chains); returns its root."""
    mapping: Dict[int, int] = {}
    for node_id in topo_order(dag):
        node = dag.nodes[node_id]
        kids = [mapping[c] for c in node.children]
        if node.kind is NodeKind.TERM:
            mapping[node_id] = b.term(node.term)
        elif node.kind is NodeKind.TRUE:
            mapping[node_id] = b.true()
        elif node.kind is NodeKind.FALSE:
            mapping[node_id] = b.false()
        elif node.kind is NodeKind.NOT:
            mapping[node_id] = b.not_(kids[0])
        elif node.kind is NodeKind.AND:
            mapping[node_id] = b.and_all(kids)
        else:
            mapping[node_id] = b.or_all(kids)
    return mapping[dag.root]


# --- gates -----------------------------------------------------------------


def gate_xor(b: DagBuilder, a: int, c: int) -> int:
    """(a AND NOT c) OR (NOT a AND c)."""
    return b.or_(b.and_(a, b.not_(c)), b.and_(b.not_(a), c))


def gate_xnor(b: DagBuilder, a: int, c: int) -> int:
    return b.not_(gate_xor(b, a, c))


def full_adder(b: DagBuilder, a: int, c: int, carry_in: int) -> Tuple[int, int]:
    a_xor_c = gate_xor(b, a, c)
    total = gate_xor(b, a_xor_c, carry_in)
    carry_out = b.or_(b.and_(a, c), b.and_(a_xor_c, carry_in))
    return total, carry_out


# --- bit vectors -----------------------------------------------------------


def const_vec(b: DagBuilder, value: int, width: int) -> BitVec:
    if value < 0 or value >= 1 << width:
        raise CircuitWidthError(f"constant {value} does not fit in {width} bits")
    return BitVec(tuple(b.const(bool(value >> i & 1)) for i in range(width)))


def zero_extend(b: DagBuilder, x: BitVec, width: int) -> BitVec:
    if x.width >= width:
        return x
    return BitVec(x.bits + (b.false(),) * (width - x.width))


def truncate(x: BitVec, width: int) -> BitVec:
    return BitVec(x.bits[:width])


def field_bits(b: DagBuilder, field: str, width: int) -> BitVec:
    """TERM leaves over the bit-sliced tokens `field#BIT<i>`."""
    return BitVec(tuple(b.term(f"{field}#BIT{i}") for i in range(width)))


def add(b: DagBuilder, x: BitVec, y: BitVec) -> BitVec:
    """Ripple-carry sum, one bit wider than the wider operand."""
    width = max(x.width, y.width)
    x, y = zero_extend(b, x, width), zero_extend(b, y, width)
    carry = b.false()
    bits = []
    for i in range(width):
        total, carry = full_adder(b, x.bits[i], y.bits[i], carry)
        bits.append(total)
    bits.append(carry)
    return BitVec(tuple(bits))


def compare_gt(b: DagBuilder, x: BitVec, y: BitVec) -> int:
    """Node retrieving d iff value(x, d) > value(y, d).

    Scans from the most significant bit; `equal_above` is the shared
    prefix "all higher bits agree", extended by one XNOR per position.
    """
    width = max(x.width, y.width)
    x, y = zero_extend(b, x, width), zero_extend(b, y, width)
    result = b.false()
    equal_above = b.true()
    for i in reversed(range(width)):
        x_wins_here = b.and_(b.and_(x.bits[i], b.not_(y.bits[i])), equal_above)
        result = b.or_(result, x_wins_here)
        equal_above = b.and_(equal_above, gate_xnor(b, x.bits[i], y.bits[i]))
    return result


def compare_ge(b: DagBuilder, x: BitVec, y: BitVec) -> int:
    return b.not_(compare_gt(b, y, x))


# --- sums ------------------------------------------------------------------


def _check_width(b: DagBuilder, bound: int) -> None:
    if bound.bit_length() > b.max_sum_width:
        raise CircuitOverflowError(
            f"sum may reach {bound}, which needs {bound.bit_length()} bits "
            f"(max width {b.max_sum_width})"
        )


def sum_tree(b: DagBuilder, items: Sequence[Tuple[BitVec, int]]) -> Tuple[BitVec, int]:
    """Add (vector, upper bound) pairs with a balanced ripple-carry adder tree.

    Partial sums are cut to the bit length of their bound; the dropped
    carries can never be set.
    """
    _check_width(b, sum(bound for _, bound in items))
    level = list(items)
    if not level:
        return BitVec(()), 0
    while len(level) > 1:
        merged = []
        for i in range(0, len(level) - 1, 2):
            (x, x_bound), (y, y_bound) = level[i], level[i + 1]
            bound = x_bound + y_bound
            merged.append((truncate(add(b, x, y), bound.bit_length()), bound))
        if len(level) % 2:
            merged.append(level[-1])
        level = merged
    return level[0]


def weighted_product(b: DagBuilder, indicator: int, weight: int) -> BitVec:
    """indicator * weight: bit i is the indicator where weight has bit i, else FALSE."""
    return BitVec(tuple(indicator if weight >> i & 1 else b.false() for i in range(weight.bit_length())))


def weighted_sum(b: DagBuilder, terms: Sequence[WeightedTerm]) -> Tuple[BitVec, int]:
    items = [(weighted_product(b, b.term(t.term), t.weight), t.weight) for t in terms]
    return sum_tree(b, items)


def weighted_sum_gt(b: DagBuilder, good: Sequence[WeightedTerm], bad: Sequence[WeightedTerm]) -> int:
    """Documents whose weighted good-term sum strictly exceeds the bad-term sum."""
    if not good or not bad:
        raise ConstraintError("weighted_sum_gt needs at least one good and one bad term")
    good_sum, _ = weighted_sum(b, good)
    bad_sum, _ = weighted_sum(b, bad)
    root = compare_gt(b, good_sum, bad_sum)
    logger.debug("weighted_sum_gt: %d good, %d bad, builder holds %d nodes", len(good), len(bad), len(b))
    return root


def weighted_sum_at_least(b: DagBuilder, terms: Sequence[WeightedTerm], threshold: int) -> int:
    """Documents whose weighted term sum reaches `threshold`."""
    if not terms:
        raise ConstraintError("weighted_sum_at_least needs at least one term")
    if threshold < 0:
        raise ConstraintError(f"threshold must be non-negative, got {threshold}")
    if threshold == 0:
        return b.true()
    total, bound = weighted_sum(b, terms)
    if threshold > bound:
        return b.false()
    return compare_gt(b, total, const_vec(b, threshold - 1, total.width))


def count_at_least(b: DagBuilder, inputs: Sequence[int], k: int) -> int:
    """Documents retrieved by at least k of the input nodes (popcount then compare)."""
    if not 0 <= k <= len(inputs) + 1:
        raise ConstraintError(f"k must be in [0, {len(inputs) + 1}], got {k}")
    b._check(*inputs)
    if k == 0:
        return b.true()
    if k == len(inputs) + 1:
        return b.false()
    popcount, _ = sum_tree(b, [(BitVec((node_id,)), 1) for node_id in inputs])
    return compare_gt(b, popcount, const_vec(b, k - 1, popcount.width))


# --- bit-sliced fields -----------------------------------------------------


def _field_constant(b: DagBuilder, constant: int, width: int) -> BitVec:
    if width < 1:
        raise CircuitWidthError(f"field width must be positive, got {width}")
    if constant < 0 or constant >= 1 << width:
        raise CircuitWidthError(f"constant {constant} does not fit in {width} bits")
    return const_vec(b, constant, width)


def field_gt_const(b: DagBuilder, field: str, constant: int, width: int) -> int:
    """Documents whose bit-sliced `field` value exceeds `constant`."""
    threshold = _field_constant(b, constant, width)
    return compare_gt(b, field_bits(b, field, width), threshold)


def field_lt_const(b: DagBuilder, field: str, constant: int, width: int) -> int:
    threshold = _field_constant(b, constant, width)
    return compare_gt(b, threshold, field_bits(b, field, width))


def field_between(b: DagBuilder, field: str, low: int, high: int, width: int) -> int:
    """low <= value <= high, both ends inclusive."""
    if low > high:
        raise ConstraintError(f"empty range [{low}, {high}]")
    value = field_bits(b, field, width)
    above = compare_ge(b, value, _field_constant(b, low, width))
    below = compare_ge(b, _field_constant(b, high, width), value)
    return b.and_(above, below)
