from fractions import Fraction

import numpy as np
from django.test import SimpleTestCase, override_settings

from tensorcore.operators import LabeledOperator, embed, random_hermitian, symmetrize, trace_norm

from .combinatorics import (
    Cluster,
    ClusteredSet,
    Partition,
    bell_number,
    compositions,
    declusterize,
    dissections,
    mobius_coefficient,
    mobius_invert,
    mobius_orthogonality,
    partition_product,
    partitions,
)
from .expansions import (
    Expansion,
    Factor,
    OrderNotSupported,
    closed_form_expansion,
    normal_form,
    printed_expansion,
    recurrence_expansion,
    scattering_expansion,
)


class PartitionTests(SimpleTestCase):

    def test_bell_numbers(self):
        self.assertEqual([bell_number(m) for m in range(6)], [1, 1, 2, 5, 15, 52])

    def test_singleton(self):
        self.assertEqual(len(partitions([4])), 1)

    def test_three_elements(self):
        found = partitions([1, 2, 3])
        self.assertEqual(len(found), 5)
        self.assertEqual(len({p.blocks for p in found}), 5)

    def test_clustered_pair(self):
        y = Cluster((1, 2))
        found = partitions(ClusteredSet((y, 3)))
        self.assertEqual({p.blocks for p in found}, {((y, 3),), ((y,), (3,))})

    def test_empty_set(self):
        with self.assertRaises(ValueError):
            partitions([])

    def test_mobius_coefficients(self):
        self.assertEqual(mobius_coefficient(Partition(((1,),))), 1)
        self.assertEqual(mobius_coefficient(Partition(((1,), (2,)))), -1)
        self.assertEqual(mobius_coefficient(Partition(((1,), (2,), (3,)))), 2)

    def test_mobius_orthogonality(self):
        self.assertEqual(mobius_orthogonality(1), 1)
        for m in range(2, 7):
            self.assertEqual(mobius_orthogonality(m), 0)

    def test_clustered_set_rules(self):
        with self.assertRaises(ValueError):
            ClusteredSet((Cluster((1,)), Cluster((2,))))
        with self.assertRaises(ValueError):
            ClusteredSet((Cluster((1, 2)), 2))
        self.assertEqual(ClusteredSet.of(2, 2).signature, (2, 1, 1))


class DeclusterizeTests(SimpleTestCase):

    def test_flatten(self):
        self.assertEqual(declusterize(ClusteredSet((Cluster((1, 2)), 3))), (1, 2, 3))

    def test_no_clusters(self):
        self.assertEqual(declusterize((4, 5)), (4, 5))

    def test_block_length(self):
        self.assertEqual(len(declusterize((Cluster((1, 2)), 3))), 3)


class DissectionTests(SimpleTestCase):

    def test_empty(self):
        found = dissections((), 1)
        self.assertEqual(len(found), 1)
        self.assertEqual(found[0].blocks, ())

    def test_pair(self):
        found = dissections(("a", "b"), 2)
        self.assertEqual({d.blocks for d in found}, {(("a", "b"),), (("a",), ("b",))})

    def test_block_bound(self):
        self.assertEqual(len(dissections(("a", "b", "c"), 2)), 4)

    def test_blocks_ordered_by_least_element(self):
        for d in dissections((1, 2, 3, 4), 4):
            firsts = [block[0] for block in d.blocks]
            self.assertEqual(firsts, sorted(firsts))
            for block in d.blocks:
                self.assertEqual(list(block), sorted(block))

    def test_unbounded_is_all_partitions(self):
        self.assertEqual(len(dissections(range(5), 5)), 52)


class CompositionTests(SimpleTestCase):

    def test_zero(self):
        self.assertEqual([c.parts for c in compositions(0, 3)], [()])

    def test_two(self):
        self.assertEqual({c.parts for c in compositions(2, 2)}, {(), (1,), (2,), (1, 1)})

    def test_length_two_of_three(self):
        pairs = {c.parts for c in compositions(3, 3) if len(c) == 2}
        self.assertEqual(pairs, {(1, 1), (1, 2), (2, 1)})
        self.assertTrue(all(c.sign == 1 for c in compositions(3, 3) if len(c) == 2))


class MobiusInversionTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(23)

    def _symmetric(self, n, scale):
        return symmetrize(random_hermitian(self.rng, range(1, n + 1), 2, scale))

    def test_chaos(self):
        connected = mobius_invert({2: LabeledOperator((1, 2), np.eye(4), 2)}, 2)
        self.assertLess(trace_norm(connected[2]), 1e-15)

    def test_pair(self):
        g2 = LabeledOperator((1, 2), np.eye(4), 2) + self._symmetric(2, 0.2)
        connected = mobius_invert({2: g2}, 2)
        np.testing.assert_allclose(connected[2].matrix, g2.matrix - np.eye(4), atol=1e-15)

    def test_round_trip(self):
        truth = {2: self._symmetric(2, 0.2), 3: self._symmetric(3, 0.1), 4: self._symmetric(4, 0.05)}
        g = {n: partition_product(truth, range(1, n + 1), 2) for n in (2, 3, 4)}
        connected = mobius_invert(g, 2)
        for n in (2, 3, 4):
            self.assertLess(trace_norm(connected[n] - truth[n]), 1e-12)
            rebuilt = partition_product(connected, range(1, n + 1), 2)
            self.assertLess(trace_norm(rebuilt - g[n]), 1e-12)

    def test_closure_with_pair_only(self):
        hat = self._symmetric(2, 0.2)
        g3 = partition_product({2: hat}, (1, 2, 3), 2)
        expected = np.eye(8, dtype=complex)
        for pair in ((1, 2), (1, 3), (2, 3)):
            expected += embed(hat.relabel({1: pair[0], 2: pair[1]}), (1, 2, 3)).matrix
        np.testing.assert_allclose(g3.matrix, expected, atol=1e-14)


class ExpansionTests(SimpleTestCase):

    def test_normal_form_commutes_disjoint_factors(self):
        a, b = Factor((2,), (4,)), Factor((1,), (3,))
        self.assertEqual(normal_form((a, b)), normal_form((b, a)))
        c = Factor((3,), (4,))
        self.assertNotEqual(normal_form((b, c)), normal_form((c, b)))

    def test_first_order(self):
        self.assertEqual(recurrence_expansion(2, 0), Expansion.single(Factor((1, 2))))

    def test_printed_second_and_third_order(self):
        for s in (1, 2, 3):
            for n in (0, 1, 2):
                self.assertEqual(recurrence_expansion(s, n).dump(), printed_expansion(s, n).dump())

    def test_second_order_dump(self):
        rows = recurrence_expansion(1, 1).dump()
        self.assertEqual(rows, [("1", ["A2(1,2)"]), ("-1", ["A1(1)", "A2(1,2)"])])

    def test_closed_form_matches_at_low_order(self):
        for s in (1, 2):
            self.assertEqual(closed_form_expansion(s, 1), recurrence_expansion(s, 1))

    def test_closed_form_third_order_uses_distinct_indices(self):
        closed = closed_form_expansion(2, 2)
        key = (Factor((1, 2)), Factor((1,), (3,)), Factor((2,), (4,)))
        self.assertEqual(closed.terms[key], Fraction(1))
        self.assertNotIn(key, recurrence_expansion(2, 2).terms)

    def test_scattering_expansion_is_single_cumulant(self):
        for s in (1, 2):
            for n in (0, 1, 2):
                expected = Expansion.single(Factor(tuple(range(1, s + 1)), tuple(range(s + 1, s + n + 1))))
                self.assertEqual(scattering_expansion(s, n), expected)

    def test_apply_evaluates_right_to_left(self):
        calls = []

        def action(factor, operand):
            calls.append(str(factor))
            return operand * 2.0

        f = LabeledOperator((1, 2), np.eye(4), 2)
        result = Expansion({(Factor((1,)), Factor((1,), (2,))): Fraction(1, 2)}).apply(action, f)
        self.assertEqual(calls, ["A2(1,2)", "A1(1)"])
        np.testing.assert_allclose(result.matrix, 2.0 * np.eye(4))

    def test_order_limit(self):
        with self.assertRaises(OrderNotSupported):
            recurrence_expansion(1, 4)
        with override_settings(WORKBENCH={"MAX_N_MAX": 1}):
            with self.assertRaisesMessage(OrderNotSupported, "order not supported"):
                closed_form_expansion(1, 2)
