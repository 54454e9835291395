import itertools

import numpy as np
import pytest

from src.baselines import eval_oracle
from src.circuit_compiler import (
    BitVec,
    DagBuilder,
    WeightedTerm,
    add,
    compare_gt,
    const_vec,
    count_at_least,
    field_between,
    field_bits,
    field_gt_const,
    field_lt_const,
    full_adder,
    gate_xor,
    truncate,
    weighted_sum_at_least,
    weighted_sum_gt,
)
from src.errors import CircuitOverflowError, CircuitWidthError, ConstraintError, UnknownNode
from src.evaluator import compute_pn
from src.index import InvertedIndex, bit_tokens, build_index
from src.query_dag import NodeKind, parse_dag, prune, reachable, serialize_dag, structurally_equal, validate

# One document, no postings: TRUE retrieves it, FALSE does not
ONE_DOC = InvertedIndex(universe_size=1)


def retrieves(b, node_id, index=ONE_DOC):
    return compute_pn(b.build(node_id), index).result


def holds(b, node_id):
    return retrieves(b, node_id).size == 1


def vec_values(b, vec, index):
    """Per-document integer value of a BitVec, by evaluating every bit."""
    values = np.zeros(index.universe_size, dtype=np.int64)
    for i, bit in enumerate(vec.bits):
        values[retrieves(b, bit, index)] += 1 << i
    return values


def pattern_index(terms):
    """One document per containment pattern: doc d holds terms[i] iff bit i of d is set."""
    return build_index(
        (d, [t for i, t in enumerate(terms) if d >> i & 1]) for d in range(1 << len(terms))
    )


def field_index(rng, universe_size, width, *fields):
    values = {f: rng.integers(0, 1 << width, size=universe_size) for f in fields}
    index = build_index(
        (d, [tok for f in fields for tok in bit_tokens(f, int(values[f][d]))]) for d in range(universe_size)
    )
    return index, values


class TestBuilder:
    def test_hash_consing(self):
        b = DagBuilder()
        first = b.and_(b.term("a"), b.term("b"))
        assert b.and_(b.term("b"), b.term("a")) == first
        assert len(b) == 3

    def test_same_gadget_twice_adds_nothing(self):
        b = DagBuilder()
        x, y = field_bits(b, "x", 6), field_bits(b, "y", 6)
        add(b, x, y)
        compare_gt(b, x, y)
        before = len(b)
        add(b, x, y)
        compare_gt(b, x, y)
        assert len(b) == before

    def test_constant_folding(self):
        b = DagBuilder()
        a = b.term("a")
        assert b.and_(a, b.true()) == a
        assert b.or_(a, b.false()) == a
        assert b.is_false(b.and_(a, b.false()))
        assert b.is_true(b.or_(a, b.true()))
        assert b.not_(b.not_(a)) == a
        assert b.is_false(b.and_(a, b.not_(a)))
        assert b.is_true(b.or_(b.not_(a), a))

    def test_no_folding_keeps_constants(self):
        b = DagBuilder(fold_constants=False)
        a = b.term("a")
        node = b.node(b.and_(a, b.true()))
        assert node.kind is NodeKind.AND

    def test_unknown_node(self):
        b = DagBuilder()
        with pytest.raises(UnknownNode):
            b.not_(42)

    def test_built_dags_validate(self):
        b = DagBuilder()
        x, y = field_bits(b, "x", 5), field_bits(b, "y", 5)
        root = b.and_(compare_gt(b, add(b, x, y), const_vec(b, 17, 6)), b.term("topic"))
        validate(b.build(root))

    def test_weight_bounds(self):
        with pytest.raises(ConstraintError):
            WeightedTerm("a", 0)
        with pytest.raises(ConstraintError):
            WeightedTerm("a", 1 << 30)


class TestXor:
    def test_self_xor_is_false(self, small_index):
        for fold in (True, False):
            b = DagBuilder(fold_constants=fold)
            a = b.term("a")
            assert retrieves(b, gate_xor(b, a, a), small_index).size == 0

    def test_false_is_identity(self, small_index):
        b = DagBuilder(fold_constants=False)
        assert retrieves(b, gate_xor(b, b.term("a"), b.false()), small_index).tolist() == [0, 1]

    def test_chain_is_parity(self, rng):
        terms = ["t1", "t2", "t3", "t4"]
        index = build_index((d, [t for t in terms if rng.random() < 0.5]) for d in range(64))
        b = DagBuilder()
        acc = b.term(terms[0])
        for t in terms[1:]:
            acc = gate_xor(b, acc, b.term(t))
        counts = sum(np.isin(np.arange(64), index.lookup(t)).astype(int) for t in terms)
        assert retrieves(b, acc, index).tolist() == np.flatnonzero(counts % 2 == 1).tolist()


class TestFullAdder:
    @pytest.mark.parametrize("a,c,carry", list(itertools.product((0, 1), repeat=3)))
    def test_truth_table(self, a, c, carry):
        b = DagBuilder(fold_constants=False)
        total, carry_out = full_adder(b, b.const(a), b.const(c), b.const(carry))
        assert holds(b, total) == bool((a + c + carry) % 2)
        assert holds(b, carry_out) == (a + c + carry >= 2)


class TestConstantArithmetic:
    def test_add_all_four_bit_pairs(self):
        b = DagBuilder(fold_constants=False)
        for x, y in itertools.product(range(16), repeat=2):
            result = add(b, const_vec(b, x, 4), const_vec(b, y, 4))
            assert result.width == 5
            assert int(vec_values(b, result, ONE_DOC)[0]) == x + y

    def test_compare_gt_all_four_bit_pairs(self):
        b = DagBuilder(fold_constants=False)
        for x, y in itertools.product(range(16), repeat=2):
            assert holds(b, compare_gt(b, const_vec(b, x, 4), const_vec(b, y, 4))) == (x > y)

    def test_five_plus_three(self):
        b = DagBuilder()
        result = add(b, const_vec(b, 5, 3), const_vec(b, 3, 3))
        assert [b.is_true(bit) for bit in result.bits] == [False, False, False, True]

    def test_add_zero_width(self):
        b = DagBuilder()
        x = const_vec(b, 6, 3)
        result = add(b, x, BitVec(()))
        assert result.bits[:3] == x.bits
        assert b.is_false(result.bits[3])

    def test_constant_must_fit(self):
        with pytest.raises(CircuitWidthError):
            const_vec(DagBuilder(), 300, 8)


class TestPerDocumentArithmetic:
    def test_add_random_operands(self, rng):
        index, values = field_index(rng, 64, 4, "x", "y")
        b = DagBuilder()
        total = add(b, field_bits(b, "x", 4), field_bits(b, "y", 4))
        assert vec_values(b, total, index).tolist() == (values["x"] + values["y"]).tolist()

    def test_compare_gt_random_operands(self, rng):
        index, values = field_index(rng, 64, 4, "x", "y")
        b = DagBuilder()
        root = compare_gt(b, field_bits(b, "x", 4), field_bits(b, "y", 4))
        assert retrieves(b, root, index).tolist() == np.flatnonzero(values["x"] > values["y"]).tolist()

    def test_compare_gt_is_irreflexive(self, rng):
        index, _ = field_index(rng, 64, 4, "x")
        b = DagBuilder(fold_constants=False)
        x = field_bits(b, "x", 4)
        assert retrieves(b, compare_gt(b, x, x), index).size == 0

    def test_node_counts_grow_linearly(self):
        b = DagBuilder()
        x, y = field_bits(b, "x", 16), field_bits(b, "y", 16)
        before = len(b)
        add(b, x, y)
        after_add = len(b)
        compare_gt(b, x, y)
        assert after_add - before <= 16 * 16
        assert len(b) - after_add <= 16 * 16


class TestWeightedSums:
    def test_single_terms(self):
        index = pattern_index(["a", "b"])
        b = DagBuilder()
        root = weighted_sum_gt(b, [WeightedTerm("a", 1)], [WeightedTerm("b", 1)])
        assert retrieves(b, root, index).tolist() == [0b01]

    def test_weight_two_against_two_ones(self):
        index = pattern_index(["a", "b", "c"])
        b = DagBuilder()
        root = weighted_sum_gt(b, [WeightedTerm("a", 2)], [WeightedTerm("b", 1), WeightedTerm("c", 1)])
        expected = [d for d in range(8) if 2 * (d & 1) > (d >> 1 & 1) + (d >> 2 & 1)]
        got = retrieves(b, root, index).tolist()
        assert got == expected
        assert 0b011 in got
        assert 0b111 not in got

    def test_overflow_guard(self):
        b = DagBuilder(max_sum_width=4)
        with pytest.raises(CircuitOverflowError):
            weighted_sum_gt(b, [WeightedTerm("a", 10), WeightedTerm("b", 10)], [WeightedTerm("c", 1)])

    def test_needs_both_sides(self):
        with pytest.raises(ConstraintError):
            weighted_sum_gt(DagBuilder(), [WeightedTerm("a", 1)], [])

    def test_at_least_threshold(self):
        terms = ["a", "b", "c"]
        weights = [3, 2, 2]
        index = pattern_index(terms)
        for threshold in range(9):
            b = DagBuilder()
            root = weighted_sum_at_least(b, [WeightedTerm(t, w) for t, w in zip(terms, weights)], threshold)
            expected = [
                d for d in range(8) if sum(w for i, w in enumerate(weights) if d >> i & 1) >= threshold
            ]
            assert retrieves(b, root, index).tolist() == expected


class TestCountAtLeast:
    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_all_thresholds(self, n):
        terms = [f"t{i}" for i in range(n)]
        index = pattern_index(terms)
        for k in range(n + 2):
            b = DagBuilder()
            root = count_at_least(b, [b.term(t) for t in terms], k)
            expected = [d for d in range(1 << n) if bin(d).count("1") >= k]
            assert retrieves(b, root, index).tolist() == expected

    def test_two_of_three(self):
        index = build_index([(0, ["t1", "t3"]), (1, ["t2"])])
        b = DagBuilder()
        root = count_at_least(b, [b.term("t1"), b.term("t2"), b.term("t3")], 2)
        assert retrieves(b, root, index).tolist() == [0]

    def test_trivial_thresholds(self):
        b = DagBuilder()
        inputs = [b.term("a"), b.term("b"), b.term("c")]
        assert b.is_true(count_at_least(b, inputs, 0))
        assert b.is_false(count_at_least(b, inputs, 4))
        with pytest.raises(ConstraintError):
            count_at_least(b, inputs, 5)


class TestFields:
    def test_greater_than_zero(self):
        index = build_index([(0, bit_tokens("v", 1)), (1, bit_tokens("v", 0))])
        b = DagBuilder()
        assert retrieves(b, field_gt_const(b, "v", 0, 8), index).tolist() == [0]

    def test_nothing_exceeds_the_maximum(self, rng):
        index, _ = field_index(rng, 100, 8, "v")
        b = DagBuilder()
        assert retrieves(b, field_gt_const(b, "v", 255, 8), index).size == 0

    def test_random_values(self, rng):
        index, values = field_index(rng, 100, 8, "v")
        b = DagBuilder()
        v = values["v"]
        assert retrieves(b, field_gt_const(b, "v", 100, 8), index).tolist() == np.flatnonzero(v > 100).tolist()
        assert retrieves(b, field_lt_const(b, "v", 100, 8), index).tolist() == np.flatnonzero(v < 100).tolist()
        between = field_between(b, "v", 40, 90, 8)
        assert retrieves(b, between, index).tolist() == np.flatnonzero((v >= 40) & (v <= 90)).tolist()

    def test_width_error(self):
        with pytest.raises(CircuitWidthError):
            field_gt_const(DagBuilder(), "v", 256, 8)

    def test_empty_range(self):
        with pytest.raises(ConstraintError):
            field_between(DagBuilder(), "v", 9, 3, 8)


class TestCompiledDags:
    def test_large_circuit_survives_the_wire_format(self, rng):
        index, values = field_index(rng, 300, 20, "x", "y", "z")
        b = DagBuilder()
        total = add(b, field_bits(b, "x", 20), field_bits(b, "y", 20))
        root = compare_gt(b, total, field_bits(b, "z", 20))
        dag = b.build(root)
        assert len(dag) >= 400
        again = parse_dag(serialize_dag(dag))
        assert structurally_equal(dag, again)
        expected = np.flatnonzero(values["x"] + values["y"] > values["z"])
        assert np.array_equal(eval_oracle(again, index), expected)
        assert np.array_equal(compute_pn(again, index).result, expected)

    def test_prune_drops_the_dead_carry(self, rng):
        index, values = field_index(rng, 256, 4, "x", "y", "z")
        b = DagBuilder()
        total = add(b, field_bits(b, "x", 4), field_bits(b, "y", 4))
        # sum taken mod 16: the final carry feeds nothing
        root = compare_gt(b, truncate(total, 4), field_bits(b, "z", 4))
        everything = b.to_dag(root)
        assert total.bits[4] not in reachable(everything)
        pruned = prune(everything)
        assert len(pruned) < len(everything)
        assert reachable(pruned) == set(range(len(pruned)))
        expected = np.flatnonzero((values["x"] + values["y"]) % 16 > values["z"])
        assert np.array_equal(eval_oracle(everything, index), expected)
        assert np.array_equal(eval_oracle(pruned, index), expected)
