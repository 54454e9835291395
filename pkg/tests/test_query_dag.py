import numpy as np
import pytest

from src.baselines import eval_oracle
from src.bench.generators import random_dag, random_index
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
from src.query_dag import (
    NodeKind,
    QueryDag,
    QueryNode,
    canonical_form,
    cse,
    dag_to_dict,
    is_normalized,
    leaf_terms,
    normalize,
    parse_dag,
    prepare,
    prune,
    reachable,
    serialize_dag,
    structurally_equal,
    topo_order,
    validate,
)
from src.evaluator import compute_pn
from tests.helpers import make_dag, wire


class TestValidate:
    def test_well_formed(self):
        dag = make_dag("r", ("a", "term", "a"), ("b", "term", "b"), ("r", "and", ["a", "b"]))
        validate(dag)
        assert dag.label(dag.root) == "r"

    def test_cycle_names_its_nodes(self):
        dag = QueryDag(
            (QueryNode(NodeKind.AND, (1, 2)), QueryNode(NodeKind.NOT, (0,)), QueryNode.leaf("t")),
            0,
            ("x", "y", "t"),
        )
        with pytest.raises(CycleDetected) as excinfo:
            validate(dag)
        assert set(excinfo.value.node_ids) >= {"x", "y"}

    def test_cycle_outside_the_root_cone_is_still_rejected(self):
        dag = QueryDag(
            (QueryNode.leaf("t"), QueryNode(NodeKind.NOT, (2,)), QueryNode(NodeKind.NOT, (1,))),
            0,
        )
        with pytest.raises(CycleDetected):
            validate(dag)

    def test_not_with_two_children(self):
        dag = QueryDag((QueryNode.leaf("a"), QueryNode(NodeKind.NOT, (0, 0))), 1, ("a", "bad"))
        with pytest.raises(ArityViolation, match="bad"):
            validate(dag)

    def test_term_with_children(self):
        dag = QueryDag((QueryNode.leaf("a"), QueryNode(NodeKind.TERM, (0,), "b")), 1)
        with pytest.raises(ArityViolation):
            validate(dag)

    def test_missing_root(self):
        dag = QueryDag((QueryNode.leaf("a"),), 3)
        with pytest.raises(MissingRoot):
            validate(dag)


class TestWireFormat:
    def test_unknown_kind(self):
        with pytest.raises(UnknownKind) as excinfo:
            parse_dag('{"root": "x", "nodes": [{"id": "x", "kind": "xor", "children": []}]}')
        assert excinfo.value.node_id == "x"

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId):
            make_dag("a", ("a", "term", "a"), ("a", "term", "b"))

    def test_dangling_child(self):
        with pytest.raises(DanglingChild) as excinfo:
            make_dag("r", ("r", "not", ["ghost"]))
        assert excinfo.value.child == "ghost"

    def test_missing_root(self):
        with pytest.raises(MissingRoot):
            make_dag("nowhere", ("a", "term", "a"))

    def test_syntax_error_has_position(self):
        with pytest.raises(DagSyntaxError) as excinfo:
            parse_dag('{"root": "a",\n "nodes": [}')
        assert excinfo.value.line == 2

    def test_extra_fields_are_rejected(self):
        with pytest.raises(DagFormatError):
            parse_dag('{"root": "a", "nodes": [{"id": "a", "kind": "term", "term": "a", "weight": 3}]}')

    def test_term_field_on_operator(self):
        with pytest.raises(DagFormatError):
            parse_dag('{"root": "a", "nodes": [{"id": "a", "kind": "true", "term": "x"}]}')

    def test_round_trip_preserves_structure(self, rng):
        for _ in range(50):
            dag = random_dag(rng, ["a", "b", "c"])
            again = parse_dag(serialize_dag(dag))
            assert structurally_equal(dag, again)

    def test_children_precede_parents(self):
        dag = make_dag("r", ("r", "or", ["x", "y"]), ("x", "term", "x"), ("y", "not", ["x"]))
        seen = set()
        for node in dag_to_dict(dag)["nodes"]:
            assert set(node.get("children", [])) <= seen
            seen.add(node["id"])


class TestTransforms:
    def test_normalize_builds_left_chains(self):
        dag = make_dag(
            "r",
            ("a", "term", "a"), ("b", "term", "b"), ("c", "term", "c"), ("d", "term", "d"),
            ("r", "and", ["a", "b", "c", "d"]),
        )
        norm = normalize(dag)
        assert is_normalized(norm)
        top = norm.nodes[norm.root]
        assert top.kind is NodeKind.AND
        left, right = top.children
        assert norm.nodes[right].term == "d"
        assert norm.nodes[left].kind is NodeKind.AND
        assert norm.label(norm.root) == "r"

    def test_normalize_unary_and_empty(self):
        dag = make_dag("r", ("a", "term", "a"), ("one", "or", ["a"]), ("none", "and"), ("r", "and", ["one", "none"]))
        norm = normalize(dag)
        kinds = {norm.label(i): norm.nodes[i].kind for i in reachable(norm)}
        assert kinds["none"] is NodeKind.TRUE
        assert "one" not in kinds

    def test_cse_merges_commuted_operands(self):
        dag = make_dag(
            "r",
            ("a", "term", "a"), ("a2", "term", "a"), ("b", "term", "b"),
            ("x", "and", ["a", "b"]), ("y", "and", ["b", "a2"]),
            ("r", "or", ["x", "y"]),
        )
        shared = cse(dag)
        assert len(shared) == 4
        root = shared.nodes[shared.root]
        assert root.children[0] == root.children[1]

    def test_cse_is_idempotent(self, rng):
        for _ in range(100):
            once = cse(normalize(random_dag(rng, ["a", "b", "c", "d"])))
            twice = cse(once)
            assert canonical_form(once) == canonical_form(twice)
            assert len(once) == len(twice)

    def test_prune_drops_unreachable(self):
        dag = make_dag("r", ("a", "term", "a"), ("junk", "term", "j"), ("r", "not", ["a"]))
        pruned = prune(dag)
        assert len(pruned) == 2
        assert leaf_terms(pruned) == ["a"]

    def test_prepare_output_is_normalized_shared_and_live(self, rng):
        for _ in range(100):
            work = prepare(random_dag(rng, ["a", "b", "c"]))
            assert is_normalized(work)
            assert reachable(work) == set(range(len(work)))
            validate(work)

    def test_topo_order_puts_children_first(self, rng):
        for _ in range(50):
            dag = random_dag(rng, ["a", "b"])
            position = {n: i for i, n in enumerate(topo_order(dag))}
            for node_id in position:
                for child in dag.nodes[node_id].children:
                    assert position[child] < position[node_id]

    def test_canonical_form_ignores_node_numbering(self):
        first = make_dag("r", ("a", "term", "a"), ("b", "term", "b"), ("r", "or", ["a", "b"]))
        second = make_dag("r", ("r", "or", ["a", "b"]), ("b", "term", "b"), ("a", "term", "a"))
        assert structurally_equal(first, second)
        third = make_dag("r", ("a", "term", "a"), ("b", "term", "b"), ("r", "and", ["a", "b"]))
        assert not structurally_equal(first, third)

    def test_wire_helper_matches_parser(self):
        doc = wire("r", ("r", "true"))
        assert doc == {"root": "r", "nodes": [{"id": "r", "kind": "true"}]}


K_ARY_TERMS = [f"t{i}" for i in range(8)]


class TestSemanticsPreserved:
    def k_ary_dags(self, rng, count):
        for _ in range(count):
            yield random_dag(rng, K_ARY_TERMS, max_nodes=25, constant_rate=0.05, max_arity=4)

    def test_generator_covers_every_arity(self, rng):
        arities = set()
        for dag in self.k_ary_dags(rng, 100):
            arities |= {len(n.children) for n in dag.nodes if n.kind in (NodeKind.AND, NodeKind.OR)}
        assert {0, 1, 2, 3, 4} <= arities

    def test_normalize(self, rng):
        index = random_index(rng, universe_size=128, n_terms=8)
        for dag in self.k_ary_dags(rng, 500):
            norm = normalize(dag)
            assert is_normalized(norm)
            assert np.array_equal(eval_oracle(norm, index), eval_oracle(dag, index))

    def test_cse_after_normalize(self, rng):
        index = random_index(rng, universe_size=128, n_terms=8)
        for dag in self.k_ary_dags(rng, 500):
            shared = cse(normalize(dag))
            assert np.array_equal(eval_oracle(shared, index), eval_oracle(dag, index))

    def test_cse_on_k_ary_input(self, rng):
        index = random_index(rng, universe_size=128, n_terms=8)
        for dag in self.k_ary_dags(rng, 300):
            assert np.array_equal(eval_oracle(cse(dag), index), eval_oracle(dag, index))

    def test_prune(self, rng):
        index = random_index(rng, universe_size=128, n_terms=8)
        for dag in self.k_ary_dags(rng, 300):
            pruned = prune(dag)
            assert reachable(pruned) == set(range(len(pruned)))
            assert np.array_equal(eval_oracle(pruned, index), eval_oracle(dag, index))

    def test_compute_pn_on_k_ary_input(self, rng):
        index = random_index(rng, universe_size=128, n_terms=8)
        for dag in self.k_ary_dags(rng, 300):
            assert np.array_equal(compute_pn(dag, index).result, eval_oracle(dag, index))

    def test_duplicated_shared_subtree(self, small_index):
        # (S AND a) OR (S AND b), S = (a OR b) AND NOT c spelled out twice
        dag = make_dag(
            "r",
            ("a1", "term", "a"), ("b1", "term", "b"), ("c1", "term", "c"),
            ("a2", "term", "a"), ("b2", "term", "b"), ("c2", "term", "c"),
            ("or1", "or", ["a1", "b1"]), ("not1", "not", ["c1"]), ("s1", "and", ["or1", "not1"]),
            ("or2", "or", ["b2", "a2"]), ("not2", "not", ["c2"]), ("s2", "and", ["not2", "or2"]),
            ("a", "term", "a"), ("b", "term", "b"),
            ("left", "and", ["s1", "a"]), ("right", "and", ["s2", "b"]),
            ("r", "or", ["left", "right"]),
        )
        shared = cse(dag)
        assert len(dag) == 17
        assert len(shared) == 9
        left, right = (shared.nodes[c] for c in shared.nodes[shared.root].children)
        assert len(set(left.children) & set(right.children)) == 1
        assert eval_oracle(shared, small_index).tolist() == eval_oracle(dag, small_index).tolist() == [0, 1]
        report = compute_pn(dag, small_index)
        assert report.counters.node_visits == 9
        assert report.result.tolist() == [0, 1]
