import numpy as np
from django.test import SimpleTestCase, override_settings
from hypothesis import given, strategies as st
from scipy import linalg

from .exceptions import HermiticityError, LabelError
from .operators import (
    PROPAGATOR_CACHE_SIZE,
    LabeledOperator,
    OneParticleSpace,
    Propagator,
    conjugate,
    embed,
    from_payload,
    partial_trace,
    propagator,
    random_density,
    random_hermitian,
    random_unitary,
    symmetrize,
    symmetry_report,
    tensor,
    to_payload,
    trace_norm,
)

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def op(labels, matrix, dim=2):
    return LabeledOperator(tuple(labels), matrix, dim)


class TensorTests(SimpleTestCase):

    def test_scalar_product(self):
        a = LabeledOperator.scalar(2.0, 2)
        b = LabeledOperator.scalar(3.0, 2)
        self.assertEqual(tensor(a, b).matrix[0, 0], 6.0)

    def test_identity_product(self):
        result = tensor(op([1], np.eye(2)), op([2], np.eye(2)))
        self.assertEqual(result.labels, (1, 2))
        np.testing.assert_allclose(result.matrix, np.eye(4))

    def test_slot_order_follows_labels(self):
        result = tensor(op([2], PAULI_Z), op([1], PAULI_X))
        self.assertEqual(result.labels, (1, 2))
        expected = np.zeros((4, 4), dtype=complex)
        for i1, i2, j1, j2 in np.ndindex(2, 2, 2, 2):
            expected[2 * i1 + i2, 2 * j1 + j2] = PAULI_X[i1, j1] * PAULI_Z[i2, j2]
        np.testing.assert_allclose(result.matrix, expected)

    def test_label_collision(self):
        with self.assertRaisesMessage(LabelError, "label collision"):
            tensor(op([1], np.eye(2)), op([1], np.eye(2)))

    def test_unsorted_labels_rejected_by_constructor(self):
        with self.assertRaises(LabelError):
            op([2, 1], np.eye(4))

    def test_bad_shape(self):
        with self.assertRaises(ValueError):
            op([1, 2], np.eye(2))


class EmbedTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(7)

    def test_no_op(self):
        a = random_hermitian(self.rng, [1], 2)
        self.assertIs(embed(a, [1]), a)

    def test_trace_factor(self):
        a = random_hermitian(self.rng, [1], 3)
        self.assertAlmostEqual(embed(a, [1, 2]).trace(), a.trace() * 3)

    def test_gap_slot_matches_index_loop(self):
        phi = random_hermitian(self.rng, [1, 3], 2)
        full = embed(phi, [1, 2, 3])
        p = phi.matrix.reshape(2, 2, 2, 2)
        expected = np.zeros((8, 8), dtype=complex)
        for a, b, c, x, y, z in np.ndindex(2, 2, 2, 2, 2, 2):
            if b == y:
                expected[4 * a + 2 * b + c, 4 * x + 2 * y + z] = p[a, c, x, z]
        np.testing.assert_allclose(full.matrix, expected, atol=1e-14)

    def test_missing_labels(self):
        with self.assertRaises(LabelError):
            embed(op([4], np.eye(2)), [1, 2])


class PartialTraceTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(11)

    def test_factorized(self):
        a = random_hermitian(self.rng, [1], 2)
        b = random_hermitian(self.rng, [2], 2)
        reduced = partial_trace(tensor(a, b), [1])
        np.testing.assert_allclose(reduced.matrix, a.matrix * b.trace(), atol=1e-13)

    def test_trace_one_positive(self):
        rho = random_density(self.rng, [1, 2, 3], 2)
        reduced = partial_trace(rho, [2])
        self.assertAlmostEqual(reduced.trace().real, 1.0, places=12)
        self.assertTrue(reduced.is_positive())

    def test_matches_double_loop(self):
        f = random_hermitian(self.rng, [1, 2], 2)
        reduced = partial_trace(f, [2])
        t = f.matrix.reshape(2, 2, 2, 2)
        expected = np.array([[sum(t[k, i, k, j] for k in range(2)) for j in range(2)] for i in range(2)])
        np.testing.assert_allclose(reduced.matrix, expected, atol=1e-14)

    def test_full_trace(self):
        f = random_hermitian(self.rng, [1, 2], 2)
        total = partial_trace(f, [])
        self.assertEqual(total.labels, ())
        self.assertAlmostEqual(total.matrix[0, 0], f.trace())

    def test_keep_not_subset(self):
        with self.assertRaises(LabelError):
            partial_trace(op([1], np.eye(2)), [2])

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_embed_partial_trace_adjoint(self, seed):
        rng = np.random.default_rng(seed)
        g = random_hermitian(rng, [2], 2)
        f = random_hermitian(rng, [1, 2, 3], 2)
        lhs = np.trace(embed(g, f.labels).matrix @ f.matrix)
        rhs = np.trace(g.matrix @ partial_trace(f, [2]).matrix)
        self.assertLess(abs(lhs - rhs), 1e-12)


class TraceNormTests(SimpleTestCase):

    def test_diagonal(self):
        self.assertAlmostEqual(trace_norm(op([1], np.diag([1.0, -2.0]))), 3.0)

    def test_svd_oracle(self):
        rng = np.random.default_rng(3)
        m = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        self.assertAlmostEqual(trace_norm(op([1, 2], m)), float(np.sum(np.linalg.svd(m)[1])), places=12)

    @given(st.integers(min_value=0, max_value=2 ** 32 - 1))
    def test_unitary_invariance(self, seed):
        rng = np.random.default_rng(seed)
        f = random_hermitian(rng, [1, 2], 2)
        u = random_unitary(rng, [1, 2], 2)
        self.assertLess(abs(trace_norm(conjugate(f, u.matrix)) - trace_norm(f)), 1e-10)


class SymmetryTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(5)

    def test_symmetric_input_unchanged(self):
        a = random_hermitian(self.rng, [1], 2)
        sym = tensor(a, a.relabel({1: 2}))
        np.testing.assert_allclose(symmetrize(sym).matrix, sym.matrix, atol=1e-14)
        self.assertLess(symmetry_report(sym).max_deviation, 1e-13)

    def test_two_labels(self):
        a = random_hermitian(self.rng, [1], 2)
        b = random_hermitian(self.rng, [2], 2)
        swapped = tensor(b.relabel({2: 1}), a.relabel({1: 2}))
        expected = 0.5 * (tensor(a, b).matrix + swapped.matrix)
        np.testing.assert_allclose(symmetrize(tensor(a, b)).matrix, expected, atol=1e-14)

    def test_three_labels_six_term_average(self):
        f = random_hermitian(self.rng, [1, 2, 3], 2)
        t = f.matrix.reshape((2,) * 6)
        perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
        expected = sum(t.transpose(list(p) + [3 + q for q in p]) for p in perms).reshape(8, 8) / 6
        np.testing.assert_allclose(symmetrize(f).matrix, expected, atol=1e-14)
        self.assertEqual(symmetry_report(f).permutations, 6)


class PropagatorTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(17)
        self.h = random_hermitian(self.rng, [1, 2], 2, scale=2.0)

    def test_zero_time(self):
        np.testing.assert_allclose(propagator(self.h, 0.0).matrix, np.eye(4))

    def test_diagonal(self):
        u = propagator(op([1], np.diag([0.3, -1.1])), 0.7)
        np.testing.assert_allclose(np.diag(u.matrix), np.exp(-0.7j * np.array([0.3, -1.1])), atol=1e-14)

    def test_matches_expm(self):
        u = propagator(self.h, 0.4)
        np.testing.assert_allclose(u.matrix, linalg.expm(-0.4j * self.h.matrix), atol=1e-12)

    def test_group_property_and_unitarity(self):
        u1, u2, u12 = (propagator(self.h, t).matrix for t in (0.3, 0.45, 0.75))
        self.assertLess(np.linalg.norm(u1 @ u2 - u12), 1e-12)
        self.assertLess(np.linalg.norm(u12.conj().T @ u12 - np.eye(4)), 1e-11)

    def test_conjugation_preserves_positivity(self):
        rho = random_density(self.rng, [1, 2], 2)
        evolved = Propagator.for_operator(self.h).conjugate(rho, 1.3)
        self.assertGreaterEqual(evolved.eigenvalues()[0], rho.eigenvalues()[0] - 1e-11)

    def test_cache_reuses_decomposition(self):
        self.assertIs(Propagator.for_operator(self.h), Propagator.for_operator(self.h))

    def test_cache_is_bounded(self):
        Propagator.clear_cache()
        self.addCleanup(Propagator.clear_cache)
        first = Propagator.for_operator(op([1], np.diag([0.0, 1.0])))
        for k in range(PROPAGATOR_CACHE_SIZE + 10):
            Propagator.for_operator(op([1], np.diag([0.0, 2.0 + k])))
        self.assertEqual(Propagator.cache_info().currsize, PROPAGATOR_CACHE_SIZE)
        self.assertIsNot(Propagator.for_operator(op([1], np.diag([0.0, 1.0]))), first)

    def test_non_hermitian_rejected(self):
        with self.assertRaises(HermiticityError):
            propagator(op([1], np.array([[0, 1], [0, 0]])), 1.0)

    @override_settings(WORKBENCH={"HERMITIAN_TOLERANCE": 10.0})
    def test_tolerance_comes_from_settings(self):
        Propagator.clear_cache()
        u = propagator(op([1], np.array([[0, 1e-3], [0, 0]])), 1.0)
        self.assertEqual(u.labels, (1,))


class SerializationTests(SimpleTestCase):

    def test_payload_layout(self):
        f = op([1], np.array([[1, 2j], [-2j, 3]]))
        payload = to_payload(f)
        self.assertEqual(payload["labels"], [1])
        self.assertEqual(payload["dim"], 2)
        self.assertEqual(payload["matrix"][1], [0.0, 2.0])
        np.testing.assert_array_equal(from_payload(payload).matrix, f.matrix)

    def test_payload_size_checked(self):
        with self.assertRaises(ValueError):
            from_payload({"labels": [1], "dim": 2, "matrix": [[1, 0]]})

    def test_space_identity(self):
        self.assertEqual(OneParticleSpace(3).identity([1, 2]).side, 9)
        with self.assertRaises(ValueError):
            OneParticleSpace(0)
